"""Writes the standards audit corpus: a golden remediated workbook, one
fixture per DS rule with a single seeded defect, and a mixed-severity file.

Run from this directory: python3 make_fixtures.py
"""
import copy
import json


def n(v, **kw):
    return {"v": v, "t": "n", **kw}


def s(v, **kw):
    return {"v": v, "t": "s", **kw}


def f(formula, v, t="n", **kw):
    return {"v": v, "t": t, "f": formula, **kw}


GOLDEN = {
    "name": "remediated",
    "sheets": [
        {
            "name": "Documentation",
            "protection_enabled": True,
            "hidden": False,
            "declared_purpose": "documentation",
            "cells": {
                "A1": s("Purpose"), "B1": s("Quarterly loss provision"),
                "A2": s("Owner"), "B2": s("Credit Risk Finance"),
                "A3": s("Version"), "B3": s("2.1"),
                "A4": s("Last Updated"), "B4": s("2024-01-31"),
                "A5": s("Sheet: Inputs"), "B5": s("input"),
                "A6": s("Sheet: Calc"), "B6": s("calculation"),
                "A7": s("Sheet: Output"), "B7": s("output"),
                "A8": s("Sheet: Change_Log"), "B8": s("log"),
                "A9": s("Sheet: Review_Log"), "B9": s("log"),
            },
        },
        {
            "name": "Inputs",
            "protection_enabled": True,
            "hidden": False,
            "declared_purpose": "input",
            "cells": {
                "A1": s("Item"), "B1": s("Amount (USD)"),
                "A2": s("Exposure"), "B2": n(1000000, locked=False),
                "A3": s("Loss rate"), "B3": n(0.02, locked=False),
                "A4": s("Recovery"), "B4": n(5000, locked=False),
            },
        },
        {
            "name": "Calc",
            "protection_enabled": True,
            "hidden": False,
            "declared_purpose": "calculation",
            "cells": {
                "A1": s("Expected loss"), "B1": f("Inputs!B2*Inputs!B3", 20000),
                "A2": s("Net loss"), "B2": f("B1-Inputs!B4", 15000),
                "A4": s("Check"), "B4": f("B1-B2-Inputs!B4", 0),
            },
        },
        {
            "name": "Output",
            "protection_enabled": True,
            "hidden": False,
            "declared_purpose": "output",
            "cells": {"A1": s("Net loss"), "B1": f("Calc!B2", 15000)},
        },
        {
            "name": "Change_Log",
            "protection_enabled": False,
            "hidden": False,
            "declared_purpose": "log",
            "cells": {
                "A1": s("Date"), "B1": s("Author"), "C1": s("Description"),
                "D1": s("Reason"), "E1": s("Reviewer"), "F1": s("Review Date"),
                "A2": s("2024-01-31"), "B2": s("A. Okafor"), "C2": s("Recovery input added"),
                "D2": s("Collateral now modelled"), "E2": s("M. Lindqvist"), "F2": s("2024-02-02"),
            },
        },
        {
            "name": "Review_Log",
            "protection_enabled": False,
            "hidden": False,
            "declared_purpose": "log",
            "cells": {
                "A1": s("Date"), "B1": s("Check Performed"), "C1": s("Result"), "D1": s("Reviewer"),
                "A2": s("2024-02-02"), "B2": s("Check cell reconciles"), "C2": s("Pass"),
                "D2": s("M. Lindqvist"),
            },
        },
    ],
    "named_ranges": {"CHK_NET": "Calc!B4"},
    "security": {"encrypted": True, "sheet_protection_count": 4},
    "source_format": "canonical_json",
}


def sheet(wb, name):
    return next(sh for sh in wb["sheets"] if sh["name"] == name)


def variant(name, mutate):
    wb = copy.deepcopy(GOLDEN)
    wb["name"] = name
    mutate(wb)
    wb["security"]["sheet_protection_count"] = sum(sh["protection_enabled"] for sh in wb["sheets"])
    return wb


def drop_owner(wb):
    cells = sheet(wb, "Documentation")["cells"]
    del cells["A2"], cells["B2"]


def drop_input_header(wb):
    del sheet(wb, "Inputs")["cells"]["B1"]


def constant_on_calc(wb):
    sheet(wb, "Calc")["cells"]["D1"] = n(0.35)


def unprotect_output(wb):
    sheet(wb, "Output")["protection_enabled"] = False


def drop_check_range(wb):
    wb["named_ranges"] = {}


def rename_reason_header(wb):
    sheet(wb, "Change_Log")["cells"]["D1"] = s("Rationale")


def drop_review_log(wb):
    wb["sheets"] = [sh for sh in wb["sheets"] if sh["name"] != "Review_Log"]
    cells = sheet(wb, "Documentation")["cells"]
    del cells["A9"], cells["B9"]


def hide_column(wb):
    sheet(wb, "Inputs")["hidden_cols"] = [3]


def unencrypt(wb):
    wb["security"]["encrypted"] = False


SEEDED = {
    "DS-DOC-01": ("defect_doc", drop_owner),
    "DS-LAB-01": ("defect_lab", drop_input_header),
    "DS-SEP-01": ("defect_sep", constant_on_calc),
    "DS-LOCK-01": ("defect_lock", unprotect_output),
    "DS-CHK-01": ("defect_chk", drop_check_range),
    "DS-LOG-01": ("defect_log_change", rename_reason_header),
    "DS-LOG-02": ("defect_log_review", drop_review_log),
    "DS-TRA-01": ("defect_tra", hide_column),
    "DS-SEC-01": ("defect_sec", unencrypt),
}


def mixed(wb):
    # high: protection off on Output (DS-LOCK-01), error value (INT-02)
    unprotect_output(wb)
    sheet(wb, "Calc")["cells"]["B2"] = f("B1-Inputs!B4", "#DIV/0!", t="e")
    # medium: no check cells, embedded constant (INT-03), no review log
    drop_check_range(wb)
    sheet(wb, "Calc")["cells"]["B1"] = f("Inputs!B2*Inputs!B3*1.05", 21000)
    drop_review_log(wb)
    # low: undocumented hidden column, reference to a blank cell (INT-05)
    hide_column(wb)
    sheet(wb, "Output")["cells"]["A2"] = s("Adjustment")
    sheet(wb, "Output")["cells"]["B2"] = f("Calc!B3", 0)


def write(name, wb):
    with open(f"{name}.wb.json", "w") as out:
        json.dump(wb, out, indent=1)
        out.write("\n")


if __name__ == "__main__":
    write("remediated", GOLDEN)
    manifest = {}
    for rule, (name, mutate) in SEEDED.items():
        write(name, variant(name, mutate))
        manifest[rule] = f"{name}.wb.json"
    write("mixed", variant("mixed", mixed))
    with open("seeded.json", "w") as out:
        json.dump(manifest, out, indent=1)
        out.write("\n")
