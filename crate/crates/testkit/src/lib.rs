//! Generators and independent oracles shared by the integration and
//! acceptance suites. Nothing here calls the code paths it is used to check.

pub mod ast_gen;
pub mod grid;
pub mod workbook_gen;

/// Column letters computed by counting how many labels of each width precede
/// `col`, then writing the remainder as a fixed-width base-26 numeral.
pub fn base26_oracle(col: u32) -> String {
    assert!(col >= 1);
    let mut remaining = u64::from(col) - 1;
    let mut width = 1u32;
    let mut block = 26u64;
    while remaining >= block {
        remaining -= block;
        width += 1;
        block *= 26;
    }
    let mut digits = vec![b'A'; width as usize];
    for slot in digits.iter_mut().rev() {
        *slot = b'A' + (remaining % 26) as u8;
        remaining /= 26;
    }
    String::from_utf8(digits).unwrap()
}

#[cfg(test)]
mod tests {
    use super::base26_oracle;

    #[test]
    fn oracle_known_points() {
        assert_eq!(base26_oracle(1), "A");
        assert_eq!(base26_oracle(26), "Z");
        assert_eq!(base26_oracle(27), "AA");
        assert_eq!(base26_oracle(52), "AZ");
        assert_eq!(base26_oracle(702), "ZZ");
        assert_eq!(base26_oracle(703), "AAA");
        assert_eq!(base26_oracle(16_384), "XFD");
    }
}
