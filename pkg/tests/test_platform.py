"""Configuration validation, DoF accounting, and world assembly tests."""

import copy
import json
import math

import pytest

from vsoftpro import joints, scenarios
from vsoftpro.platform import (
    ConfigError,
    assemble,
    dof_accounting,
    resolved_doc,
    validate,
)


def _doc1():
    return scenarios.load_canned("config1")


def _doc2():
    return scenarios.load_canned("config2")


# ---------------------------------------------------------------------------
# Validation


def test_canned_configs_validate():
    cfg1 = validate(_doc1())
    assert cfg1.elbow_variant == "D2"
    assert cfg1.wrist_variant == "VSWrist"
    assert cfg1.hand_variant == "SoftHandPro"
    cfg2 = validate(_doc2())
    assert cfg2.elbow_variant == "AA"
    assert cfg2.wrist_variant == "Rotator"
    assert cfg2.hand_variant == "SoftHand2"


def test_unknown_keys_rejected():
    doc = _doc1()
    doc["elbow"]["frobnicate"] = 1
    with pytest.raises(ConfigError) as exc:
        validate(doc)
    assert any("frobnicate" in p for p, _ in exc.value.errors)


def test_all_errors_collected_not_just_first():
    doc = _doc1()
    doc["elbow"]["spring"] = {"a": -1.0, "b": 0.0}
    doc["elbow"]["variant"] = "XX"
    with pytest.raises(ConfigError) as exc:
        validate(doc)
    assert len(exc.value.errors) >= 3


def test_nonpositive_spring_rate_rejected():
    doc = _doc1()
    doc["elbow"]["spring"] = {"a": 1.0, "b": 0.0}
    with pytest.raises(ConfigError):
        validate(doc)


def test_bad_rom_rejected():
    doc = _doc1()
    doc["elbow"]["rom_deg"] = [100, -45]
    with pytest.raises(ConfigError):
        validate(doc)


def test_bad_variant_names_rejected():
    for section, bad in (("elbow", "E3"), ("wrist", "WristX"), ("hand", "Hook")):
        doc = _doc1()
        doc[section]["variant"] = bad
        with pytest.raises(ConfigError):
            validate(doc)


def test_missing_elbow_section_rejected():
    doc = _doc1()
    del doc["elbow"]
    with pytest.raises(ConfigError):
        validate(doc)


def test_resolved_doc_round_trips():
    cfg = validate(_doc1())
    doc = resolved_doc(cfg)
    cfg2 = validate(doc)
    assert resolved_doc(cfg2) == doc
    json.dumps(doc)  # must be serializable as-is


def test_resolved_doc_reports_degrees():
    cfg = validate(_doc1())
    doc = resolved_doc(cfg)
    lo, hi = doc["elbow"]["rom_deg"]
    assert hi - lo == pytest.approx(145.0)


# ---------------------------------------------------------------------------
# DoF accounting


def test_dof_accounting_config1_and_config2():
    assert (dof_accounting(validate(_doc1())).kinematic,
            dof_accounting(validate(_doc1())).stiffness) == (5, 2)
    assert (dof_accounting(validate(_doc2())).kinematic,
            dof_accounting(validate(_doc2())).stiffness) == (4, 1)


def test_dof_accounting_quick_disconnect_passive():
    doc = _doc1()
    doc["wrist"] = {"variant": "QuickDisconnect"}
    acc = dof_accounting(validate(doc))
    assert acc.kinematic == 3
    assert acc.stiffness == 1
    assert acc.active == 2
    assert acc.passive == 1


# ---------------------------------------------------------------------------
# Assembly


def test_assemble_motor_counts():
    assert len(assemble(validate(_doc1())).motors) == 7
    assert len(assemble(validate(_doc2())).motors) == 5


def test_assemble_deep_copies_models():
    cfg = validate(_doc1())
    w1 = assemble(cfg)
    w2 = assemble(cfg)
    w1.elbow.motor_refs = (1.0, 0.5)
    assert w2.elbow.motor_refs == (0.0, 0.0)
    assert cfg.elbow.motor_refs == (0.0, 0.0)


def test_assembled_world_steps_without_error():
    w = assemble(validate(_doc1()), payload=1.0)
    w.refs.elbow_q = 0.3
    w.refs.elbow_k = 270.0  # stiff, so the 1 kg payload sag stays small
    w.refs.wfe = 0.1
    w.refs.hand[0] = 0.4
    for _ in range(1000):
        w.tick()
    assert math.isfinite(w.q) and math.isfinite(w.qd)
    assert abs(w.q - 0.3) < 0.05


def test_assemble_quick_disconnect_world():
    doc = _doc1()
    doc["wrist"] = {"variant": "QuickDisconnect"}
    w = assemble(validate(doc))
    assert isinstance(w.wrist, joints.WristCommercialModel)
    assert w.joint_ids() == ["elbow", "hand_s1"]
    w.tick()
    assert w.ps_angle == 0.0
