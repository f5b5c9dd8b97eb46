import xml.etree.ElementTree as ET

from structnet.battery import main, quick_config, run_battery


def test_quick_battery_writes_every_figure(tmp_path):
    timings = run_battery(tmp_path, quick_config())
    names = sorted(p.name[:5] for p in tmp_path.glob("fig*.svg"))
    assert sorted(set(names)) == [f"fig{n:02d}" for n in range(2, 15)]
    for p in tmp_path.glob("*.svg"):
        ET.parse(p)
    assert set(timings) >= {"training pair", "depth"}


def test_battery_cli(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "--quick"]) == 0
    assert "total" in capsys.readouterr().out
