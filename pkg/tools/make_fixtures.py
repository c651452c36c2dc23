"""Regenerate the fixture patient cases under fixtures/.

Geometry is authored so that, for case_a, only the portal and mesenteric
veins lie within the 2.0 mm resection margin of the tumor; case_b uses a
3.0 mm margin with the same membership. Everything is deterministic, so
re-running the script reproduces byte-identical fixtures.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from scopevoice.mesh import save_obj
from scopevoice.meshgen import box, icosphere, rotated

ROOT = Path(__file__).resolve().parents[1] / "fixtures"

SEGMENTS = [
    # id, display name, synonyms, category
    ("celiac_trunk", "Celiac trunk", ["coeliac trunk"], "artery"),
    ("gastroduodenal_artery", "GDA", ["GDA", "gastroduodenalis"], "artery"),
    ("mesenteric_artery", "Mesenteric artery", ["superior mesenteric artery", "SMA"], "artery"),
    ("splenic_artery", "Splenic artery", [], "artery"),
    ("gastric_artery", "Gastric artery", ["gastrica sinistra"], "artery"),
    ("hepatic_artery", "Hepatic artery", ["liver artery"], "artery"),
    ("portal_vein", "Portal vein", ["vena portae"], "vein"),
    ("vena_cava", "Vena cava", ["inferior vena cava", "cava"], "vein"),
    ("splenic_vein", "Splenic vein", [], "vein"),
    ("mesenteric_vein", "Mesenteric vein", ["superior mesenteric vein", "vena mesenterica"], "vein"),
    ("tumor", "Tumor", ["lesion", "cancer"], "tumor"),
    ("variation", "Variation", ["anatomical variation"], "variation"),
]


def case_a_meshes():
    # tumor: radius-5 sphere at the origin; level-3 icospheres carry
    # vertices exactly on the +-axes, so axis-aligned wall gaps are exact
    return {
        "tumor": icosphere((0, 0, 0), 5.0, level=3),
        "portal_vein": box((6.0, -2.5, -18), (9.0, 2.5, 18)),          # gap 1.0
        "mesenteric_vein": box((-2.5, 6.6, -18), (2.5, 9.6, 18)),      # gap 1.6
        "splenic_vein": box((-15, -2, 9.0), (5, 2, 12.0)),             # gap 4.0
        "vena_cava": box((-14, -3, -20), (-11, 3, 20)),                # gap 6.0
        "gastroduodenal_artery": box((-2, -11, -12), (2, -8.5, 12)),   # gap 3.5
        "celiac_trunk": box((-3, -3, -14), (3, 3, -12)),               # gap 7.0
        "mesenteric_artery": box((8, 8, -10), (11, 11, 10)),           # gap ~6.3 (corner)
        "splenic_artery": box((-10, 10, -3), (10, 13, 3)),             # gap 5.0
        "gastric_artery": box((4, 12, -6), (7, 15, 6)),                # gap ~7.6
        "hepatic_artery": rotated(box((12, -1.5, -10), (14, 1.5, 10)), "z", 25, (13, 0, 0)),
        "variation": rotated(box((8, -6, 10), (12, -2, 13)), "x", 15, (10, -4, 11.5)),
    }


def case_b_meshes():
    # second patient: smaller tumor, off-center, wider margin (3.0 mm)
    c = (1.0, 0.5, 0.0)
    return {
        "tumor": icosphere(c, 4.0, level=3),
        "portal_vein": box((6.2, -2, -16), (9.2, 3, 16)),              # gap 1.2
        "mesenteric_vein": box((-2, 7.1, -16), (3, 10.1, 16)),         # gap 2.6
        "splenic_vein": box((-14, -1.5, 9.0), (5, 2.5, 12.0)),         # gap 5.0
        "vena_cava": box((-12, -2.5, -18), (-9, 3.5, 18)),             # gap 6.0
        "gastroduodenal_artery": box((-1, -12.5, -10), (3, -7.5, 10)), # gap 4.0
        "celiac_trunk": box((-2, -2.5, -13), (4, 3.5, -10)),           # gap 6.0
        "mesenteric_artery": box((9, 9, -8), (12, 12, 8)),             # gap ~7.8
        "splenic_artery": box((-9, 10.5, -3), (11, 13.5, 3)),          # gap 6.0
        "gastric_artery": box((5, 11.5, -5), (8, 14.5, 5)),            # gap ~7.7
        "hepatic_artery": rotated(box((12, -1, -9), (14, 2, 9)), "z", 20, (13, 0.5, 0)),
        "variation": rotated(box((9, -7, 9), (13, -3, 12)), "x", 10, (11, -5, 10.5)),
    }


def case_doc(case_id: str, margin: float, diagnosis: str, rules: list[dict]) -> dict:
    return {
        "case_id": case_id,
        "resection_margin_mm": margin,
        "diagnosis": diagnosis,
        "guidelines": rules,
        "segments": [
            {
                "id": sid,
                "display_name": name,
                "synonyms": syns,
                "category": cat,
                "mesh_ref": f"meshes/{sid}.obj",
            }
            for sid, name, syns, cat in SEGMENTS
        ],
    }


def write_case(case_id: str, meshes: dict, doc: dict) -> None:
    case_dir = ROOT / case_id
    (case_dir / "meshes").mkdir(parents=True, exist_ok=True)
    for sid, mesh in meshes.items():
        save_obj(mesh, case_dir / "meshes" / f"{sid}.obj")
    (case_dir / "case.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {case_dir}/case.json ({len(meshes)} meshes)")


def main() -> None:
    write_case(
        "case_a",
        case_a_meshes(),
        case_doc(
            "case_a",
            2.0,
            "Borderline resectable adenocarcinoma of the pancreatic head with venous contact.",
            [
                {
                    "rule_id": "margin_rule",
                    "kind": "infiltration_margin",
                    "description": "Structures within 2.0 mm of the tumor are considered infiltrated and fall inside the resection margin.",
                    "params": {"margin_mm": 2.0},
                },
                {
                    "rule_id": "resect_splenic_vein",
                    "kind": "resect_with_tumor",
                    "description": "Resect the splenic vein together with the tumor due to venous confluence involvement.",
                    "params": {"segments": ["splenic_vein"]},
                },
                {
                    "rule_id": "note_variation",
                    "kind": "informational",
                    "description": "Aberrant hepatic arterial anatomy present; verify the variation segment before ligation.",
                    "params": {},
                },
            ],
        ),
    )
    write_case(
        "case_b",
        case_b_meshes(),
        case_doc(
            "case_b",
            3.0,
            "Pancreatic body adenocarcinoma abutting the superior mesenteric vein.",
            [
                {
                    "rule_id": "margin_rule",
                    "kind": "infiltration_margin",
                    "description": "Structures within 3.0 mm of the tumor are considered infiltrated and fall inside the resection margin.",
                    "params": {"margin_mm": 3.0},
                },
                {
                    "rule_id": "resect_gastric_artery",
                    "kind": "resect_with_tumor",
                    "description": "Resect the gastric artery together with the tumor per the planned lymphadenectomy.",
                    "params": {"segments": ["gastric_artery"]},
                },
            ],
        ),
    )


if __name__ == "__main__":
    main()
