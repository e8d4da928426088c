from willflow.io import DiagnosticsRow, DiagnosticsWriter
from willflow.plotting import plot_diagnostics


def test_plot_diagnostics(tmp_path):
    path = tmp_path / "diagnostics.csv"
    with DiagnosticsWriter(path) as writer:
        for k in range(1, 6):
            t = 1e-4 * k
            writer.write(
                DiagnosticsRow(
                    t, 1e-3 / k, 4 * 3.14159, 6.28, 12.566, 0, 0, 0, 1e-9, 1e-11,
                    1e-12, 1e-12, 1e-12, 1e-12, -0.05 / k, -0.05 / k, 1e-2, 1e-4, 0.3, 0.01,
                )
            )
    png = plot_diagnostics(path)
    assert png == tmp_path / "diagnostics.png", "The plot is written next to the table."
    assert png.stat().st_size > 0, "The plot is not empty."
    other = plot_diagnostics(path, tmp_path / "custom.png")
    assert other.exists(), "An explicit output path is honoured."
