//! Deterministic demo registry: 700 financial and 200 operational
//! applications across all tiers and validation states.

use chrono::Duration;

use crate::timefmt::{self, Timestamp};

use super::store::NewRecord;

pub const DEMO_FINANCIAL: usize = 700;
pub const DEMO_OPERATIONAL: usize = 200;

const PROCESSES: [&str; 6] = [
    "Month-end close",
    "Regulatory reporting",
    "Loss provisioning",
    "Treasury",
    "Trade support",
    "Payments operations",
];
const OWNERS: [&str; 8] = [
    "A. Okafor",
    "B. Chen",
    "C. Duarte",
    "D. Novak",
    "E. Haddad",
    "F. Moreau",
    "G. Tanaka",
    "H. Quinn",
];
const MANAGERS: [&str; 3] = ["M. Lindqvist", "R. Adeyemi", "S. Kowalski"];

/// `today` anchors the validation dates so that the mix of never, current,
/// due and overdue records is the same on every run.
pub fn demo_records(today: Timestamp) -> Vec<NewRecord> {
    let mut out = Vec::with_capacity(DEMO_FINANCIAL + DEMO_OPERATIONAL);
    for i in 0..DEMO_FINANCIAL + DEMO_OPERATIONAL {
        let financial = i < DEMO_FINANCIAL;
        let tier = match i % 10 {
            0 => "critical",
            1..=3 => "significant",
            _ => "standard",
        };
        let frequency: i64 = match tier {
            "critical" => 90,
            "significant" => 180,
            _ => 365,
        };
        // spread the last validation across never / current / due / overdue
        let last = match i % 7 {
            0 => None,
            1 => Some(today - Duration::days(frequency + 10)),
            2 => Some(today - Duration::days(frequency - 5)),
            _ => Some(today - Duration::days((i as i64 * 13) % (frequency - 20))),
        };
        let (prefix, kind) = if financial { ("FIN", "model") } else { ("OPS", "tracker") };
        out.push(NewRecord {
            name: format!("{prefix}-{:04} {} {kind}", i + 1, PROCESSES[i % PROCESSES.len()]),
            owner: OWNERS[i % OWNERS.len()].to_string(),
            line_manager: MANAGERS[i % MANAGERS.len()].to_string(),
            business_process: PROCESSES[i % PROCESSES.len()].to_string(),
            category: if financial { "financial" } else { "operational" }.to_string(),
            tier: tier.to_string(),
            file_key: Some(format!("{}/{prefix}-{:04}.xlsx", if financial { "finance" } else { "ops" }, i + 1)),
            last_validated_at: last.map(|t| timefmt::format(&t)),
            validation_frequency_days: Some(frequency),
        });
    }
    out
}
