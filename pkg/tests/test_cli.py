import json
import math

import numpy as np
import pytest

from switchspin import PulseSequence, cli, fileio


def run(tmp_path, config, *flags, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return cli.main(["--config", str(path), *flags])


REF_SYSTEM = {"A": 1.0, "B": 1.0, "omega_I": -0.5}


@pytest.mark.parametrize(
    "expr, want",
    [("pi", math.pi), ("pi/2", math.pi / 2), ("-2*pi + 1", 1 - 2 * math.pi), (3, 3.0), ("1e-3", 1e-3)],
)
def test_parse_number(expr, want):
    assert cli.parse_number(expr) == pytest.approx(want)


@pytest.mark.parametrize("expr", ["__import__('os')", "pi**2", "1/0", "x", True, None])
def test_parse_number_rejects_unsafe_or_bad(expr):
    with pytest.raises(cli.ConfigError):
        cli.parse_number(expr)


def test_frame_task_prints_periods(tmp_path, capsys):
    assert run(tmp_path, {"task": "frame", "system": REF_SYSTEM, "out": str(tmp_path / "f")}) == 0
    out = capsys.readouterr().out
    assert "(4 pi)" in out
    frame = json.loads((tmp_path / "f" / "frame.json").read_text())["frames"][0]
    assert frame["t_beta"] == pytest.approx(4 * math.pi / math.sqrt(5), abs=1e-12)
    assert frame["lie_dimension"] == 6 and frame["lowenthal_k"] == 2


def test_simulate_empty_sequence(tmp_path):
    seq = fileio.save_sequence(tmp_path / "empty.json", PulseSequence(()))
    rc = cli.main(["--task", "simulate", "--sequence", str(seq), "--out", str(tmp_path / "o"),
                   "--config", str(_write(tmp_path, {"system": REF_SYSTEM}))])
    assert rc == 0
    u = json.loads((tmp_path / "o" / "propagator.json").read_text())["unitary"]
    assert np.allclose(np.array(u["re"]) + 1j * np.array(u["im"]), np.eye(4))


def _write(tmp_path, cfg, name="base.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


SELECTIVE = {
    "task": "synthesize-selective",
    "system": REF_SYSTEM,
    "target": {"axis": [0, 0, 1], "angle": "pi", "manifold": "alpha"},
    "seed": 2,
}


def test_selective_end_to_end_and_resimulation(tmp_path):
    assert run(tmp_path, SELECTIVE | {"out": str(tmp_path / "a")}) == 0
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    for key in fileio.MANIFEST_FIELDS:
        assert key in man
    assert man["converged"] and min(man["fidelity_alpha"], man["fidelity_beta"]) >= 1 - 1e-6
    assert man["seed"] == 2 and man["version"]
    rc = run(tmp_path, SELECTIVE | {"out": str(tmp_path / "s")}, "--task", "simulate",
             "--sequence", str(tmp_path / "a" / "sequence.json"))
    assert rc == 0
    sim = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert abs(sim["fidelity_alpha"] - man["fidelity_alpha"]) < 1e-10
    assert abs(sim["fidelity_beta"] - man["fidelity_beta"]) < 1e-10


def test_identical_runs_give_identical_files(tmp_path):
    cfg = SELECTIVE | {"target": "random"}
    run(tmp_path, cfg, "--out", str(tmp_path / "x"))
    run(tmp_path, cfg, "--out", str(tmp_path / "y"))
    assert (tmp_path / "x" / "sequence.json").read_bytes() == (tmp_path / "y" / "sequence.json").read_bytes()


def test_non_convergence_writes_flagged_artifact(tmp_path):
    cfg = SELECTIVE | {
        "options": {"max_sweeps": 1, "restarts": 1, "polish": False, "max_segments": 4, "k_start": 2},
        "out": str(tmp_path / "nc"),
    }
    assert run(tmp_path, cfg) == cli.EXIT_NOT_CONVERGED
    man = json.loads((tmp_path / "nc" / "manifest.json").read_text())
    assert man["converged"] is False and (tmp_path / "nc" / "sequence.json").exists()


@pytest.mark.parametrize(
    "cfg",
    [
        {"task": "teleport", "system": REF_SYSTEM},
        {"task": "frame"},
        {"task": "frame", "system": {"A": 1.0, "B": -1.0, "omega_I": 0.0}},
        {"task": "frame", "system": REF_SYSTEM, "units": "SI"},
        {"task": "frame", "system": REF_SYSTEM, "seed": -1},
        {"task": "synthesize-selective", "system": REF_SYSTEM, "target": {"axis": [0, 0, 0], "angle": 1}},
        {"task": "synthesize-pair", "system": REF_SYSTEM, "targets": {"gamma": "identity"}},
        {"task": "protocol", "system": REF_SYSTEM, "protocol": {"name": "teleport"}},
        {"task": "simulate", "system": REF_SYSTEM},
        {"task": "scan", "system": REF_SYSTEM, "offsets": {"min": 1, "max": 0}},
    ],
)
def test_validation_errors_exit_2(tmp_path, cfg):
    assert run(tmp_path, cfg | {"out": str(tmp_path / "o")}) == cli.EXIT_INVALID


def test_unreadable_config_exits_2(tmp_path):
    assert cli.main(["--config", str(tmp_path / "missing.json")]) == cli.EXIT_INVALID


def test_degenerate_systems_exit_4(tmp_path):
    assert run(tmp_path, {"task": "frame", "system": {"A": 1.0, "B": 0.0, "omega_I": -0.5}}, "--out", str(tmp_path)) == 4
    same = {"nuclei": [REF_SYSTEM, REF_SYSTEM]}
    cfg = {"task": "synthesize-multi", "system": same, "targets": [{"alpha": "identity"}, {"alpha": "identity"}]}
    assert run(tmp_path, cfg, "--out", str(tmp_path)) == cli.EXIT_DEGENERATE


def test_protocol_scan_and_trajectory(tmp_path):
    proto = {"task": "protocol", "system": REF_SYSTEM, "protocol": {"name": "refocused-uniform", "axis": [1, 0, 0], "angle": "pi"}}
    assert run(tmp_path, proto, "--out", str(tmp_path / "p"), "--offset-steps", "5") == 0
    rows = fileio.read_csv_rows(tmp_path / "p" / "profile.csv")
    assert len(rows) == 5 and all(abs(r[1] - 1) < 1e-6 for r in rows)
    assert run(tmp_path, proto | {"task": "scan", "metric": "full_phase_sensitive"}, "--out", str(tmp_path / "s"),
               "--sequence", str(tmp_path / "p" / "sequence.json")) == 0
    man = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert man["profile_spread"] < 1e-6
    assert run(tmp_path, SELECTIVE, "--out", str(tmp_path / "q")) == 0
    rc = run(tmp_path, SELECTIVE | {"task": "trajectory", "v0": [1, 0, 0]}, "--out", str(tmp_path / "t"),
             "--sequence", str(tmp_path / "q" / "sequence.json"), "--dt", "0.5")
    assert rc == 0
    text = (tmp_path / "t" / "trajectory.csv").read_text()
    assert text.startswith("# seed=2\nt,x,y,z\n")


@pytest.mark.parametrize("name", ["controlled-z", "polarization-transfer"])
def test_other_protocols(tmp_path, name):
    cfg = {"task": "protocol", "system": REF_SYSTEM, "protocol": {"name": name}}
    assert run(tmp_path, cfg, "--out", str(tmp_path / name)) == 0


def test_cartan_protocol_with_named_gate(tmp_path):
    cfg = {"task": "protocol", "system": REF_SYSTEM, "protocol": {"name": "cartan", "gate": "cnot"}}
    assert run(tmp_path, cfg, "--out", str(tmp_path / "c")) == 0
    man = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert man["fidelity"] >= 1 - 1e-6


def test_si_units_round_trip(tmp_path):
    lab = {"lab": {"B0": 0.35, "gamma_e": -1.76e11, "gamma_n": 2.675e8, "A": 1.0e8, "B": 1.0e8}}
    cfg = {"task": "synthesize-pair", "units": "SI", "system": lab,
           "targets": {"alpha": {"axis": [1, 0, 0], "angle": "pi/2"}, "beta": None}}
    assert run(tmp_path, cfg, "--out", str(tmp_path / "si")) == 0
    seq = json.loads((tmp_path / "si" / "sequence.json").read_text())
    assert seq["units"] == "SI"
    assert max(e["duration"] for e in seq["events"] if e["type"] == "delay") < 1e-5
    man = json.loads((tmp_path / "si" / "manifest.json").read_text())
    assert man["fidelity_beta"] is None
    rc = run(tmp_path, cfg | {"task": "simulate"}, "--out", str(tmp_path / "sim"),
             "--sequence", str(tmp_path / "si" / "sequence.json"))
    assert rc == 0
    sim = json.loads((tmp_path / "sim" / "manifest.json").read_text())
    assert abs(sim["fidelity_alpha"] - man["fidelity_alpha"]) < 1e-10


def test_multi_task(tmp_path):
    cfg = {
        "task": "synthesize-multi",
        "system": {"nuclei": [REF_SYSTEM, {"A": 0.6, "B": 0.4, "omega_I": -0.5}]},
        "targets": [{"alpha": {"axis": [0, 0, 1], "angle": "pi"}, "beta": "identity"},
                    {"alpha": "identity", "beta": "identity"}],
    }
    assert run(tmp_path, cfg, "--out", str(tmp_path / "m")) == 0
    man = json.loads((tmp_path / "m" / "manifest.json").read_text())
    assert man["fidelity_alpha"] >= 1 - 1e-6
