import xml.etree.ElementTree as ET

import pytest

from fairtab.debias import TraceRecord
from fairtab.errors import InputError
from fairtab.metrics import TRACE_HEADER, export_trace, read_trace, render_convergence_chart

SVG = "{http://www.w3.org/2000/svg}"


def record(epoch, d_bar=None, **kw):
    base = dict(
        mse=0.5 / (epoch + 1),
        d_current=0.69,
        d_hat=0.1 * epoch,
        l_a=0.9 / (epoch + 1),
        ratchet_best=0.9 / (epoch + 1),
        baseline=0.55,
    )
    base.update(kw)
    return TraceRecord(epoch=epoch, d_bar=d_bar, **base)


@pytest.fixture
def trace():
    out = []
    for e in range(12):
        out.append(record(e, d_bar=0.8 if (e + 1) % 5 == 0 else None))
    return out


def test_export_header_is_exact(tmp_path, trace):
    path = tmp_path / "trace.csv"
    export_trace(trace, path)
    first = path.read_text(encoding="utf-8").splitlines()[0]
    assert first == "epoch,mse,d_current,d_hat,l_a,ratchet_best,d_bar,baseline"
    assert first.split(",") == TRACE_HEADER


def test_export_single_epoch_two_lines(tmp_path):
    path = tmp_path / "t.csv"
    export_trace([record(0)], path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2


def test_export_roundtrip_is_lossless(tmp_path, trace):
    path = tmp_path / "t.csv"
    export_trace(trace, path)
    assert read_trace(path) == trace


def test_export_blank_d_bar_cells(tmp_path, trace):
    path = tmp_path / "t.csv"
    export_trace(trace, path)
    rows = path.read_text(encoding="utf-8").splitlines()[1:]
    d_bar_cells = [line.split(",")[6] for line in rows]
    assert sum(cell != "" for cell in d_bar_cells) == 2  # epochs 5 and 10
    assert d_bar_cells[0] == ""


def test_export_audit_at_single_epoch(tmp_path):
    out = [record(e, d_bar=0.7 if e == 500 else None) for e in (498, 499, 500, 501)]
    path = tmp_path / "t.csv"
    export_trace(out, path)
    rows = path.read_text(encoding="utf-8").splitlines()[1:]
    non_blank = [line for line in rows if line.split(",")[6] != ""]
    assert len(non_blank) == 1
    assert non_blank[0].startswith("500,")


def test_export_rejects_empty_trace(tmp_path):
    with pytest.raises(InputError):
        export_trace([], tmp_path / "t.csv")


def test_export_unwritable_path_is_io_error(tmp_path, trace):
    with pytest.raises(OSError):
        export_trace(trace, tmp_path / "missing-dir" / "t.csv")


def test_chart_is_wellformed_xml_with_one_polyline_per_series(tmp_path, trace):
    path = tmp_path / "chart.svg"
    render_convergence_chart(trace, path)
    root = ET.parse(path).getroot()
    assert root.tag == f"{SVG}svg"
    polylines = root.findall(f"{SVG}polyline")
    # axis frame + 5 scaled series + d_bar + baseline
    series = [p for p in polylines if p.get("stroke") != "#333333"]
    assert len(series) == 7


def test_chart_baseline_is_dashed_horizontal(tmp_path, trace):
    path = tmp_path / "chart.svg"
    render_convergence_chart(trace, path)
    root = ET.parse(path).getroot()
    dashed = [
        p for p in root.findall(f"{SVG}polyline") if p.get("stroke-dasharray")
    ]
    assert len(dashed) == 1
    pts = dashed[0].get("points").split()
    ys = {p.split(",")[1] for p in pts}
    assert len(ys) == 1  # horizontal


def test_chart_constant_series_is_horizontal(tmp_path):
    flat = [record(e, mse=0.25, l_a=0.25, ratchet_best=0.25, d_hat=0.25) for e in range(4)]
    path = tmp_path / "chart.svg"
    render_convergence_chart(flat, path)
    root = ET.parse(path).getroot()
    mse_line = [
        p for p in root.findall(f"{SVG}polyline") if p.get("stroke") == "#1f77b4"
    ][0]
    ys = {pt.split(",")[1] for pt in mse_line.get("points").split()}
    assert len(ys) == 1


def test_chart_audit_series_keeps_true_scale(tmp_path, trace):
    # d_bar = 0.8 must sit at the 0.8 mark of the [0, 1] axis, unnormalized
    path = tmp_path / "chart.svg"
    render_convergence_chart(trace, path)
    root = ET.parse(path).getroot()
    d_bar_line = [
        p for p in root.findall(f"{SVG}polyline") if p.get("stroke") == "#000000"
    ][0]
    y = float(d_bar_line.get("points").split()[0].split(",")[1])
    top, bottom = 25.0, 520 - 45.0
    expected = bottom - 0.8 * (bottom - top)
    assert y == pytest.approx(expected, abs=0.01)


def test_chart_without_audits_skips_d_bar_series(tmp_path):
    plain = [record(e) for e in range(4)]
    path = tmp_path / "chart.svg"
    render_convergence_chart(plain, path)
    root = ET.parse(path).getroot()
    series = [
        p
        for p in root.findall(f"{SVG}polyline")
        if p.get("stroke") not in ("#333333",)
    ]
    assert len(series) == 6
