import json
import os
import subprocess
import sys

import pytest

from abmlevels.cli import DEMOS, build_parser, demo_text, main
from abmlevels.modelparse import parse_model

from conftest import GOLDEN

COMMANDS = ["parse", "run", "sample", "classify", "check-inter", "sweep", "partition", "validate", "demo"]


def print_help(command=None):
    argv = [command, "--help"] if command else ["--help"]
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 0


def render_help(command=None):
    parser = build_parser()
    if command is None:
        return parser.format_help()
    sub = next(a for a in parser._actions if a.dest == "command")
    return sub.choices[command].format_help()


@pytest.mark.parametrize("command", [None] + COMMANDS)
def test_help_matches_golden(command, capsys):
    name = "main" if command is None else command
    path = GOLDEN / f"help-{name}.txt"
    text = render_help(command)
    if os.environ.get("ABMLEVELS_REGEN_GOLDEN"):
        path.write_text(text)
    print_help(command)
    assert capsys.readouterr().out == text
    assert text == path.read_text()
    assert all(len(line) <= 80 for line in text.splitlines())


def export(name, tmp_path):
    assert main(["demo", name, "--export", "--out", str(tmp_path)]) == 0
    return tmp_path / f"{name}.abm", tmp_path / f"{name}.cet"


def test_run_writes_a_trace(tmp_path, capsys):
    model, _ = export("toggle", tmp_path)
    capsys.readouterr()
    assert main(["run", "--model", str(model), "--seed", "3", "--horizon", "3", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    path = tmp_path / "toggle-seed3-h3.trace"
    assert f"trace {path}" in out and "events 6" in out
    assert path.read_text().strip()


def test_sample_coin(tmp_path, capsys):
    model, cet = export("coin", tmp_path)
    capsys.readouterr()
    argv = ["sample", "--model", str(model), "--pattern", str(cet), "--n", "400", "--horizon", "1",
            "--exact", "10", "--out", str(tmp_path)]
    assert main(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split("\t")[-1] == "exact"
    row = dict(zip(lines[0].split("\t"), lines[1].split("\t")))
    assert row["pattern"] == "flag_set" and row["exact"] == "1/2"
    assert float(row["lo"]) <= 0.5 <= float(row["hi"])
    assert (tmp_path / "coin.table.tsv").exists() and (tmp_path / "coin.freq.tsv").exists()


def test_classify_and_parse(tmp_path, capsys):
    model, cet = export("theft", tmp_path)
    main(["run", "--model", str(model), "--horizon", "4", "--out", str(tmp_path)])
    capsys.readouterr()
    trace = next(tmp_path.glob("*.trace"))
    assert main(["classify", "--model", str(model), "--pattern", str(cet), "--trace", str(trace),
                 "--out", str(tmp_path)]) == 0
    table = capsys.readouterr().out
    assert "any_theft\ttrue" in table
    assert main(["parse", "--model", str(model)]) == 0
    assert parse_model(capsys.readouterr().out) == parse_model(model.read_text())


def test_sweep_partition_validate_pipeline(tmp_path, capsys):
    for ext in ("abm", "cet", "ilm"):
        (tmp_path / f"flip.{ext}").write_text(FLIP_FILES[ext])
    out = tmp_path / "out"
    out.mkdir()
    argv = ["sweep", "--model", str(tmp_path / "flip.abm"), "--pattern", str(tmp_path / "flip.cet"),
            "--ilm", str(tmp_path / "flip.ilm"), "--grid", "p=0.1,0.3,0.7,0.9", "--n", "10", "--horizon", "1",
            "--stat", "edge:xa->xb", "--tolerance", "0.3", "--out", str(out)]
    assert main(argv) == 0
    text = capsys.readouterr().out
    assert text.count("cell p=") == 4 and "R1" in text
    assert main(["partition", "--cells", str(out / "flip.cells.tsv"), "--tolerance", "0.3",
                 "--stat", "edge:xa->xb", "--out", str(out)]) == 0
    capsys.readouterr()
    assert json.loads((out / "regions.json").read_text()) == json.loads((out / "flip.regions.json").read_text())
    data = tmp_path / "d.tsv"
    data.write_text("p:numeric\ty:numeric\n" + "".join(f"{p}\t{-1 if p < 0.5 else 1}\n"
                                                        for p in (0.1, 0.1, 0.2, 0.3, 0.8, 0.8, 0.9)))
    (tmp_path / "b.txt").write_text("node edge:xa->xb = y\nparam p = p\n")
    assert main(["validate", "--data", str(data), "--binding", str(tmp_path / "b.txt"),
                 "--regions", str(out / "regions.json"), "--out", str(out)]) == 0
    assert capsys.readouterr().out.startswith("overall pass\nunassigned rows 0\n")
    assert json.loads((out / "validation.json").read_text())["overall"] == "pass"


FLIP_FILES = {
    "abm": """model flip
params
  p: decimal[0, 1, 2] = 0.5
agents
  agent A
    a: int[0, 9]
    b: decimal[-9, 9, 2]
    rule r: when true do b := a * (p - 0.5)
population
  A 5: a = random
""",
    "cet": "macro ma := mean(a)\nmacro mb := mean(b)\n",
    "ilm": "node xa = macro_at(ma, 0)\nnode xb = macro_at(mb, final)\nedge xa -> xb correlation * 0.5\n",
}


def test_errors_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.abm"
    bad.write_text("model bad\nagents\n  agent A\n    x: int[0, 2]\n    rule r: when true do y := 1\n"
                   "population\n  A 1\n")
    assert main(["parse", "--model", str(bad)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error: ") and "5:" in err
    assert main(["parse", "--model", str(tmp_path / "missing.abm")]) == 1
    assert main(["demo", "nosuch"]) == 1
    model, _ = export("coin", tmp_path)
    assert main(["run", "--model", str(model), "--param", "zz=1", "--out", str(tmp_path)]) == 1


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["run"], ["sample", "--model", "m", "--n", "many"]])
def test_usage_errors_exit_two(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2
    assert "usage:" in capsys.readouterr().err


def test_console_script_is_byte_identical(tmp_path):
    outs = []
    for k in range(3):
        d = tmp_path / f"o{k}"
        d.mkdir()
        proc = subprocess.run([sys.executable, "-m", "abmlevels.cli", "demo", "adopt", "--n", "50", "--out", str(d)],
                              capture_output=True, text=True, check=True)
        outs.append((proc.stdout, (d / "adopt.table.tsv").read_bytes(), (d / "adopt.freq.tsv").read_bytes()))
    assert outs[0] == outs[1] == outs[2]


def test_out_directory_comes_from_environment(tmp_path, monkeypatch, capsys):
    target = tmp_path / "env-out"
    target.mkdir()
    monkeypatch.setenv("ABMLEVELS_OUT", str(target))
    monkeypatch.chdir(tmp_path)
    assert main(["demo", "toggle", "--n", "5"]) == 0
    assert (target / "toggle.table.tsv").exists()
    assert not (tmp_path / "toggle.table.tsv").exists()


def test_demo_list_and_bundled_sources(capsys):
    assert main(["demo"]) == 0
    listed = [line.split()[0] for line in capsys.readouterr().out.splitlines()]
    assert listed == list(DEMOS)
    for name in DEMOS:
        assert parse_model(demo_text(name, "abm")).name.startswith(name)
