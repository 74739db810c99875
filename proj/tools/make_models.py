#!/usr/bin/env python3
"""Writes the shipped model and scenario files under models/ and scenarios/.

Values marked illustrative in each file's metadata are placeholders chosen
to give the example models sensible behaviour; the rest are the published
vehicle-attacker and murder-plot configurations.
"""

import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent

VEHICLE_TASKS = [
    ("EngageWithRadicalisers", "Engaging with radicals", 0.020),
    ("EngageInPublicThreats", "Engaging in public threats", 0.001),
    ("MakePersonalThreats", "Making personal threats", 0.001),
    ("RedPubEngInRad", "Fewer public engagements in radicalisation", 0.600),
    ("RedCntctWthFmlyFrnds", "Fewer contacts with family and friends", 0.300),
    ("ObtainResources", "Securing monetary resources", 0.300),
    ("LearnToDrive", "Learning to drive large vehicle", 0.300),
    ("ObtainVehicle", "Obtaining vehicle", 0.200),
    ("ReconnoitreTargets", "Reconnaissance of target locations", 0.100),
    ("MoveToTarget", "Moving to target location", 0.200),
]

VEHICLE_INCIDENCE = {
    "A": ["EngageWithRadicalisers", "RedPubEngInRad", "RedCntctWthFmlyFrnds", "ObtainResources"],
    "T": ["RedPubEngInRad", "ObtainResources", "LearnToDrive", "ObtainVehicle"],
    "P": ["EngageInPublicThreats", "MakePersonalThreats", "ObtainVehicle", "ReconnoitreTargets"],
    "M": ["EngageInPublicThreats", "MakePersonalThreats", "ReconnoitreTargets", "MoveToTarget"],
}

# Observable id, name, task columns (1-based), illustrative mean and sd.
VEHICLE_OBSERVABLES = [
    ("RadWebVisits", "Radical website visits", [1, 4, 5], 3.0, 2.0),
    ("PhysicalMeetsWithRadicals", "Physical meetings with known radicals", [1, 5], 1.0, 1.0),
    ("E-MeetsWithradicals", "Electronic meetings with known radicals", [1, 4, 5], 2.0, 1.5),
    ("MeetTrainedRadicals", "Meetings with trained radicals", [1, 5], 0.5, 0.5),
    ("MeetCellMembers", "Meetings with known cell members", [1, 5], 0.5, 0.5),
    ("SeenAtRadicalDemonstrations", "Seen at radical demonstrations", [1, 5], 0.5, 0.5),
    ("ContactsWithNonRadicals", "Contacts with non-radicals", [4], 10.0, 3.0),
    ("PublicThreatsMade", "Public threats made", [2], 0.2, 0.4),
    ("PersonalThreatMade", "Personal threats made", [3], 0.2, 0.4),
    ("IncreaseInFinances", "Increase in known financial resources", [6, 7, 8], 0.0, 1.0),
    ("DecreaseInFinances", "Decrease in known financial resources", [7, 8], 0.0, 1.0),
    ("ObtainLGVLicence", "Obtaining large vehicle driving licence", [7], 0.05, 0.2),
    ("CarDealerWebHits", "Vehicle dealer or rental website visits", [8], 1.0, 1.0),
    ("CarDealerPhysicalVisits", "Vehicle dealer or rental physical visits", [8], 0.2, 0.4),
    ("E-VisitsToTargetLocations", "E-visits to target locations", [9], 0.5, 0.5),
    ("VisitsToTargetLocations", "Physical visits to target locations", [9], 0.2, 0.4),
    ("LegacyStatements", "Legacy statements", [10], 0.05, 0.2),
    ("StatementOfIntent", "Statements of intent", [2, 3, 10], 0.1, 0.3),
]


def vehicle(zeta):
    task_ids = [t[0] for t in VEHICLE_TASKS]
    incidence = {}
    for obs_id, _, cols, _, _ in VEHICLE_OBSERVABLES:
        incidence[obs_id] = [task_ids[c - 1] for c in cols]
    return {
        "format": 1,
        "metadata": {
            "title": "Vehicle attacker",
            "illustrative": [
                "edges", "observables.mean", "observables.sd", "likelihood_params",
            ],
            "holding_note": "zeta=%g for every active state" % zeta,
        },
        "states": [
            {"id": "N", "name": "Neutral"},
            {"id": "A", "name": "ActiveConvert"},
            {"id": "T", "name": "Training"},
            {"id": "P", "name": "Preparing"},
            {"id": "M", "name": "Mobilised"},
        ],
        "edges": [
            {"from": "A", "to": "T", "probability": 0.4},
            {"from": "A", "to": "P", "probability": 0.3},
            {"from": "T", "to": "P", "probability": 0.7},
            {"from": "P", "to": "M", "probability": 0.7},
            {"from": "M", "to": "P", "probability": 0.5},
        ],
        "priors": {"N": 0.05, "A": 0.6, "T": 0.2, "P": 0.1, "M": 0.05},
        "tasks": [{"id": i, "name": n} for i, n, _ in VEHICLE_TASKS],
        "task_state_incidence": VEHICLE_INCIDENCE,
        "neutral_task_probs": {i: p for i, _, p in VEHICLE_TASKS},
        "p_plus": {"A": 0.4, "T": 0.4, "P": 0.4, "M": 0.4},
        "observables": [
            {"id": i, "name": n, "mean": m, "sd": s} for i, n, _, m, s in VEHICLE_OBSERVABLES
        ],
        "observable_task_incidence": incidence,
        "likelihood_params": {i: {"x0": 1.0, "k0": 1.0, "k1": 5.0} for i in task_ids},
        "likelihood_mode": "average",
        "holding_params": {"A": zeta, "T": zeta, "P": zeta, "M": zeta},
        "substeps_k": 1,
        "score_weights": {"N": 0, "A": 1, "T": 2, "P": 3, "M": 4},
    }


def murder_plot():
    # Positive indicators are tasks whose enactment points at the state;
    # negative ones are tasks whose enactment would have moved it elsewhere.
    tasks = [
        ("theta1", "Acquire gun"),
        ("theta2", "Train to shoot"),
        ("theta3", "Lose gun"),
        ("theta4", "Locate target"),
        ("theta5", "Approach target"),
        ("theta6", "Attempt murder"),
        ("theta7", "Fail and escape"),
    ]
    incidence = {
        "w1": {"positive": ["theta3"], "negative": ["theta1", "theta2"]},
        "w2": {"positive": ["theta1"], "negative": ["theta2", "theta3"]},
        "w3": {"positive": ["theta2", "theta3"], "negative": ["theta1"]},
        "w4": {"positive": ["theta1", "theta2", "theta7"], "negative": ["theta3", "theta4", "theta5", "theta6"]},
        "w5": {"positive": ["theta4", "theta5", "theta6"], "negative": ["theta7"]},
    }
    observables = [
        ("gun_enquiries", "Firearm enquiries", ["theta1", "theta3"]),
        ("range_visits", "Shooting range visits", ["theta2"]),
        ("target_searches", "Searches about the target", ["theta4"]),
        ("target_sightings", "Sightings near the target", ["theta5", "theta6"]),
    ]
    return {
        "format": 1,
        "metadata": {
            "title": "Murder plot",
            "illustrative": [
                "edges", "priors", "neutral_task_probs", "p_plus", "holding_params", "observables",
            ],
        },
        "states": [
            {"id": "w0", "name": "Plot ends"},
            {"id": "w1", "name": "Cannot shoot, no gun"},
            {"id": "w2", "name": "Cannot shoot, has gun"},
            {"id": "w3", "name": "Trained to shoot, no gun"},
            {"id": "w4", "name": "Trained to shoot, has gun"},
            {"id": "w5", "name": "Attempt murder"},
        ],
        "edges": [
            {"from": "w1", "to": "w2", "probability": 0.4},
            {"from": "w1", "to": "w3", "probability": 0.4},
            {"from": "w2", "to": "w4", "probability": 0.6},
            {"from": "w2", "to": "w1", "probability": 0.2},
            {"from": "w3", "to": "w4", "probability": 0.7},
            {"from": "w4", "to": "w5", "probability": 0.6},
            {"from": "w4", "to": "w3", "probability": 0.2},
            {"from": "w5", "to": "w4", "probability": 0.3},
        ],
        "priors": {"w0": 0.1, "w1": 0.5, "w2": 0.15, "w3": 0.15, "w4": 0.07, "w5": 0.03},
        "tasks": [
            {"id": i, "name": n, "evidence_only": i == "theta7"} for i, n in tasks
        ],
        "task_state_incidence": incidence,
        "neutral_task_probs": {
            "theta1": 0.05, "theta2": 0.1, "theta3": 0.05, "theta4": 0.1,
            "theta5": 0.05, "theta6": 0.01, "theta7": 0.01,
        },
        "p_plus": {"w1": 0.4, "w2": 0.4, "w3": 0.4, "w4": 0.4, "w5": 0.4},
        "observables": [{"id": i, "name": n, "mean": 0.5, "sd": 0.5} for i, n, _ in observables],
        "observable_task_incidence": {i: t for i, _, t in observables},
        "holding_params": {"w1": 0.05, "w2": 0.05, "w3": 0.05, "w4": 0.05, "w5": 0.2},
    }


def ramp(t, start, end, lo, hi):
    if t <= start:
        return lo
    if t >= end:
        return hi
    return lo + (hi - lo) * (t - start) / (end - start)


def write_csv(path, ids, rows):
    with open(path, "w") as f:
        f.write(",".join(["t"] + ids) + "\n")
        for t, values in rows:
            cells = [str(t)]
            for i in ids:
                v = values.get(i)
                cells.append("" if v is None else ("%.6g" % v))
            f.write(",".join(cells) + "\n")


def baseline():
    return {i: m for i, _, _, m, _ in VEHICLE_OBSERVABLES}


def escalation_rows(first, last):
    # Mobilised-task intensities climb above x0 in the final weeks.
    rows = []
    for t in range(first, last + 1):
        v = baseline()
        frac = (t - first) / (last - first)
        v["RadWebVisits"] = 3.0 + 2.0 * frac
        v["E-MeetsWithradicals"] = 2.0 + 2.0 * frac
        v["IncreaseInFinances"] = ramp(t, first, first + 4, 0.0, 2.0) if t < first + 6 else 0.0
        v["DecreaseInFinances"] = 2.0 if first + 6 <= t < first + 10 else 0.0
        v["CarDealerWebHits"] = 3.0 if t < first + 10 else 1.0
        v["CarDealerPhysicalVisits"] = 1.0 if t < first + 10 else 0.2
        v["E-VisitsToTargetLocations"] = ramp(t, first + 7, last, 0.5, 3.5)
        v["VisitsToTargetLocations"] = ramp(t, last - 4, last, 0.2, 2.2)
        v["PublicThreatsMade"] = ramp(t, last - 8, last, 0.2, 1.6)
        v["PersonalThreatMade"] = ramp(t, last - 8, last, 0.2, 1.6)
        v["LegacyStatements"] = 1.0 if t >= last - 2 else 0.05
        v["StatementOfIntent"] = 1.5 if t >= last - 2 else 0.1
        if t % 7 == 3:
            v["SeenAtRadicalDemonstrations"] = None
        rows.append((t, v))
    return rows


def deescalation_rows(first, last):
    # Everything decays linearly from escalated levels to zero.
    start = dict(escalation_rows(first, last)[-1][1])
    rows = []
    for t in range(first, last + 1):
        frac = 1.0 - (t - first) / (last - first)
        rows.append((t, {k: (None if v is None else v * frac) for k, v in start.items()}))
    return rows


def main():
    models = ROOT / "models"
    scenarios = ROOT / "scenarios"
    models.mkdir(exist_ok=True)
    scenarios.mkdir(exist_ok=True)
    for name, doc in [
        ("vehicle.json", vehicle(0.01)),
        ("vehicle_zeta0001.json", vehicle(0.001)),
        ("murder_plot.json", murder_plot()),
    ]:
        (models / name).write_text(json.dumps(doc, indent=2) + "\n")

    ids = [o[0] for o in VEHICLE_OBSERVABLES]
    write_csv(scenarios / "escalation.csv", ids, escalation_rows(1, 24))
    write_csv(scenarios / "deescalation.csv", ids, deescalation_rows(1, 24))
    write_csv(scenarios / "scenario_a.csv", ids, escalation_rows(0, 26))
    write_csv(scenarios / "scenario_b.csv", ids, deescalation_rows(0, 26))

    evidence = [json.dumps({"t": t, "values": {k: v for k, v in vals.items() if v is not None}})
                for t, vals in escalation_rows(1, 24)]
    evidence.append(json.dumps({"kind": "evidence", "t": 24, "clamps": {"MoveToTarget": 1},
                                "note": "surveillance report"}))
    (scenarios / "escalation_with_evidence.jsonl").write_text("\n".join(evidence) + "\n")


if __name__ == "__main__":
    main()
