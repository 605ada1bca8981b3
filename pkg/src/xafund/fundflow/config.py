"""Versioned approval-chain and stage-gate configuration.

The active configuration maps each payment scenario to the ordered review
steps it needs and the project stages it may be created in.  The file is
canonical JSON on disk; its digest is embedded in every submission so a
replay can confirm which configuration was in force when a payment entered
review.

Step scopes resolve to concrete reviewers at submission time:

* ``counterparty`` — the contract party opposite the payment's initiator org
* ``initiator_org`` — another user of the initiator's own org
* ``government``   — any user of a Government-role org

``Authorized`` mode prepends one ``initiator_org`` pre-authorization step to
the scenario's chain.
"""

from __future__ import annotations

import json
import os
from typing import Dict, List, Optional

from ..canonical import canonical_bytes, digest_of
from ..errors import ValidationFailed
from ..events import MODES, PROJECT_STAGES, SCENARIOS

CONFIG_VERSION = 1

_TWO_STEP = [{"scope": "counterparty"}, {"scope": "government"}]
_INTERNAL = [{"scope": "initiator_org"}]

_FROM_BUDGET = ["Budget", "Construction", "Completion"]
_CONSTRUCTION = ["Construction"]
_COMPLETION = ["Completion"]

DEFAULT_CONFIG = {
    "version": CONFIG_VERSION,
    "authorized_preauth": {"scope": "initiator_org"},
    "scenarios": {
        "SupplierMaterialPayment": {
            "stages": _CONSTRUCTION,
            "steps": _TWO_STEP,
            "modes": ["Application", "Authorized", "Penetrating"],
        },
        "SubcontractPayment": {
            "stages": _CONSTRUCTION,
            "steps": _TWO_STEP,
            "modes": ["Application", "Authorized", "Penetrating"],
        },
        "ProjectAdvancePayment": {
            "stages": _FROM_BUDGET,
            "steps": _TWO_STEP,
            "modes": ["Application", "Authorized", "Penetrating"],
        },
        "ProjectProgressPayment": {
            "stages": _CONSTRUCTION,
            "steps": _TWO_STEP,
            "modes": ["Application", "Authorized", "Penetrating"],
        },
        "ProjectFinalPayment": {
            "stages": _COMPLETION,
            "steps": _TWO_STEP,
            "modes": ["Application", "Authorized", "Penetrating"],
        },
        "BuilderWages": {
            "stages": _CONSTRUCTION,
            "steps": _TWO_STEP,
            "modes": ["Application", "Authorized", "Penetrating"],
        },
        "DailyReimbursement": {
            "stages": _FROM_BUDGET,
            "steps": _INTERNAL,
            "modes": ["Application", "Authorized"],
        },
        "StaffLoan": {
            "stages": _FROM_BUDGET,
            "steps": _INTERNAL,
            "modes": ["Application", "Authorized"],
        },
    },
}


class ApprovalConfig:
    def __init__(self, raw: dict):
        _validate(raw)
        self.raw = raw
        self.config_hash = digest_of(raw)

    @classmethod
    def default(cls) -> "ApprovalConfig":
        return cls(json.loads(json.dumps(DEFAULT_CONFIG)))

    @classmethod
    def load(cls, path: str) -> "ApprovalConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(canonical_bytes(self.raw))
            fh.write(b"\n")

    def scenario(self, name: str) -> dict:
        return self.raw["scenarios"][name]

    def allowed_stages(self, scenario: str) -> List[str]:
        return self.scenario(scenario)["stages"]

    def allowed_modes(self, scenario: str) -> List[str]:
        return self.scenario(scenario)["modes"]

    def step_scopes(self, scenario: str, mode: str) -> List[dict]:
        steps = list(self.scenario(scenario)["steps"])
        if mode == "Authorized":
            steps = [dict(self.raw["authorized_preauth"])] + steps
        return steps

    def combos(self) -> List[tuple]:
        out = []
        for scenario in SCENARIOS:
            for mode in self.allowed_modes(scenario):
                out.append((scenario, mode))
        return out


def _validate(raw: dict) -> None:
    if not isinstance(raw, dict) or raw.get("version") != CONFIG_VERSION:
        raise ValidationFailed("unsupported approval config version")
    scenarios = raw.get("scenarios")
    if not isinstance(scenarios, dict) or set(scenarios) != set(SCENARIOS):
        raise ValidationFailed("approval config must cover exactly the known scenarios")
    for name, entry in scenarios.items():
        if not entry.get("steps"):
            raise ValidationFailed(f"{name}: empty approval chain")
        for step in entry["steps"]:
            if step.get("scope") not in ("counterparty", "initiator_org", "government"):
                raise ValidationFailed(f"{name}: unknown step scope")
        for stage in entry.get("stages", []):
            if stage not in PROJECT_STAGES:
                raise ValidationFailed(f"{name}: unknown stage {stage}")
        for mode in entry.get("modes", []):
            if mode not in MODES:
                raise ValidationFailed(f"{name}: unknown mode {mode}")


def load_or_install(path: str) -> ApprovalConfig:
    if os.path.exists(path):
        return ApprovalConfig.load(path)
    config = ApprovalConfig.default()
    config.save(path)
    return config
