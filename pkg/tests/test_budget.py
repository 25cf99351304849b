import io
import math

import pytest
from hypothesis import given, settings, strategies as st

from oracles import four_term_phase
from qgem import backgrounds as bg
from qgem import budget
from qgem import entangle as ent
from qgem.errors import ConfigError

NOMINAL = budget.ExperimentConfig(mass=1e-14)


def _tau_for_pi(m, d=400e-6, dx=100e-6):
    return math.pi / four_term_phase(m, 1.0, d, dx)


def _ideal():
    return budget.ExperimentConfig(mass=1e-13, tau=_tau_for_pi(1e-13), gradient=2e6,
                                   t1=0.5, coherence_time=2.0)


def test_total_dephasing():
    assert budget.total_dephasing([]) == 0.0
    assert budget.total_dephasing({"gas": 0.1, "blackbody": 0.2}) == pytest.approx(0.3)
    assert budget.total_dephasing([("b", 0.2), ("a", 0.1)]) == \
        budget.total_dephasing([("a", 0.1), ("b", 0.2)])
    with pytest.raises(ValueError):
        budget.total_dephasing([("x", -1.0)])


def test_nominal_point_matches_hand_composition():
    rep = budget.evaluate(NOMINAL)
    g = ent.TwoInterferometerGeometry()
    state = ent.assemble_state(ent.gravitational_phases(1e-14, 1.0, ent.pairwise_distances(g)))
    assert rep.phi_grav == pytest.approx(0.0211, rel=1e-2)
    assert rep.negativity == ent.negativity(state)
    assert rep.negativity == pytest.approx(5.3e-3, rel=1e-2)
    assert rep.entangled
    assert rep.witness == ent.witness_value(state)


def test_every_constraint_once():
    rep = budget.evaluate(NOMINAL)
    names = [c.name for c in rep.constraints]
    assert len(names) == len(set(names))
    assert set(names) >= {"coherence", "background_ratio", "superposition_size", "witness",
                          "dp_collapse"}
    assert rep.constraint("dp_collapse").informational


def test_ideal_config_passes_everything():
    rep = budget.evaluate(_ideal())
    assert rep.feasible
    assert rep.negativity == pytest.approx(0.5, abs=1e-9)
    assert rep.witness == pytest.approx(2.0, abs=1e-9)


def test_unmitigated_dipole_fails_background():
    cfg = budget.ExperimentConfig(mass=1e-14, dipole_p="1e-4 e*cm")
    rep = budget.evaluate(cfg)
    c = rep.constraint("background_ratio")
    assert not c.passed and c.measured > 1e5
    assert not rep.feasible


def test_background_ratio_is_mitigated_first_principles():
    cfg = budget.ExperimentConfig(mass=1e-14, dipole_p="1e-4 e*cm",
                                  mitigation=(("shield", 1e-4), ("discharge", 1e-5)))
    rep = budget.evaluate(cfg)
    raw = bg.dipole_gravity_ratio_fp(1e-14, 400e-6, bg.DipoleSpec(1.602176634e-25))
    assert rep.background_ratio_after_mitigation == pytest.approx(raw * 1e-9, rel=1e-12)
    scaled = bg.dipole_gravity_ratio_scaling(1e-14, 400e-6, 1.602176634e-25) * 1e-9
    assert abs(rep.background_ratio_after_mitigation / scaled - 1) < 0.2


def test_referential_transparency():
    cfg = budget.ExperimentConfig(mass=1e-14, dephasing=(("gas", 0.01),))
    assert budget.evaluate(cfg).as_dict() == budget.evaluate(cfg).as_dict()


def test_report_notes_flag_defaults():
    notes = budget.evaluate(NOMINAL).notes
    assert any("ratio_threshold" in n for n in notes)
    assert any("5.7e-16" in n for n in notes)
    assert budget.evaluate(NOMINAL).as_dict()["schema"] == 1


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_dephasing_monotone(rate, extra):
    a = budget.evaluate(budget.ExperimentConfig(mass=1e-13, dephasing=(("gas", rate),)))
    b = budget.evaluate(budget.ExperimentConfig(mass=1e-13, dephasing=(("gas", rate + extra),)))
    assert b.negativity <= a.negativity + 1e-12
    assert b.witness <= a.witness + 1e-12


def test_shield_constraint_is_informational():
    cfg = budget.ExperimentConfig(mass=1e-14, dipole_p=1e-30, shield_enabled=True)
    c = budget.evaluate(cfg).constraint("shield_image_dipole")
    assert c.informational


def test_config_validation():
    with pytest.raises(ConfigError):
        budget.ExperimentConfig(mass=0.0)
    with pytest.raises(ConfigError):
        budget.ExperimentConfig(mass=1e-14, dephasing=(("gas", -1.0),))


def test_unknown_path():
    with pytest.raises(ConfigError):
        budget.Axis("geometry.q", (1.0,))
    with pytest.raises(ConfigError):
        budget.set_param(NOMINAL, "nope", 1.0)


def test_empty_axis():
    with pytest.raises(ConfigError):
        budget.Axis("mass", ())
    with pytest.raises(ConfigError):
        budget.ScanSpec(())


def test_scan_mass_axis_scaling():
    rows = budget.scan(budget.ScanSpec((budget.Axis("mass", (1e-15, 1e-14)),)), NOMINAL)
    assert len(rows) == 2
    assert rows[1].report.phi_grav / rows[0].report.phi_grav == pytest.approx(100.0, rel=1e-12)


def test_scan_row_order_is_lexicographic():
    spec = budget.ScanSpec((budget.Axis("mass", (1e-15, 1e-14)), budget.Axis("tau", (1.0, 2.0, 3.0))))
    params = [r.params for r in budget.scan(spec, NOMINAL)]
    assert params[0] == (("mass", 1e-15), ("tau", 1.0))
    assert params[2] == (("mass", 1e-15), ("tau", 3.0))
    assert params[3] == (("mass", 1e-14), ("tau", 1.0))


def _csv(rows):
    buf = io.StringIO()
    budget.write_scan_csv(rows, buf)
    return buf.getvalue()


def test_scan_independent_of_workers():
    spec = budget.ScanSpec((budget.Axis.logspace("mass", 1e-15, 1e-13, 4),
                            budget.Axis("dephasing.gas", (0.0, 0.1, 1.0))))
    assert _csv(budget.scan(spec, NOMINAL)) == _csv(budget.scan(spec, NOMINAL, workers=3))


def test_scan_csv_columns():
    rows = budget.scan(budget.ScanSpec((budget.Axis("mass", (1e-14,)),)), NOMINAL)
    header = _csv(rows).split("\r\n")[0]
    assert header == "mass,phi_grav,phi_dip,negativity,witness,runs,ratio,pass"


def test_optimize_finds_ideal_point():
    base = _ideal()
    spec = budget.ScanSpec((budget.Axis.linspace("tau", 1.0, 2.0, 5),))
    res = budget.optimize(spec, base)
    assert res.report.witness == pytest.approx(2.0, abs=1e-6)
    assert res.score >= res.grid_best_score
    assert not res.all_infeasible


def test_optimize_not_worse_than_grid():
    spec = budget.ScanSpec((budget.Axis.logspace("mass", 1e-15, 1e-13, 4),
                            budget.Axis.linspace("tau", 0.5, 1.0, 3)), objective="negativity")
    res = budget.optimize(spec, budget.ExperimentConfig(mass=1e-14, gradient=2e6))
    grid = budget.scan(spec, budget.ExperimentConfig(mass=1e-14, gradient=2e6))
    assert res.score >= max(budget.score(r.report, "negativity") for r in grid)


def test_optimize_deterministic():
    spec = budget.ScanSpec((budget.Axis.linspace("tau", 0.5, 2.0, 4),), seed=5)
    a = budget.optimize(spec, NOMINAL)
    b = budget.optimize(spec, NOMINAL)
    assert a.params == b.params and a.report.as_dict() == b.report.as_dict()


def test_shrunken_box_reproduces_evaluate():
    nominal = budget.ExperimentConfig(mass=1e-14)
    spec = budget.ScanSpec((budget.Axis("mass", (1e-14 * (1 - 1e-12), 1e-14 * (1 + 1e-12))),))
    res = budget.optimize(spec, nominal)
    ref = budget.evaluate(nominal)
    assert res.report.witness == pytest.approx(ref.witness, abs=1e-9)
    assert res.report.negativity == pytest.approx(ref.negativity, abs=1e-9)


def test_optimize_flags_all_infeasible():
    cfg = budget.ExperimentConfig(mass=1e-14, dipole_p="1e-4 e*cm")
    res = budget.optimize(budget.ScanSpec((budget.Axis("tau", (0.5, 1.0)),)), cfg)
    assert res.all_infeasible and not res.report.feasible
