import os

import numpy as np
import pytest

from report.cli import main
from report.figures import FigureSpec, SchemaError, read_variances, render

KARATE_NODES = 34


@pytest.fixture
def karate_coords(tmp_path):
    """34 projected nodes in the CLI coordinate format, two communities."""
    rng = np.random.default_rng(0)
    path = tmp_path / "coords.tsv"
    with open(path, "w") as fh:
        fh.write("id\tx\ty\n")
        for i in range(1, KARATE_NODES + 1):
            cx = -2.0 if i <= 17 else 2.0
            x, y = rng.normal(cx, 0.4), rng.normal(0, 0.4)
            fh.write(f"{i}\t{x:.6f}\t{y:.6f}\n")
    return str(path)


@pytest.fixture
def karate_labels(tmp_path):
    path = tmp_path / "labels.txt"
    with open(path, "w") as fh:
        for i in range(1, KARATE_NODES + 1):
            fh.write(f"{i} {0 if i <= 17 else 1}\n")
    return str(path)


@pytest.fixture
def gaussian_coords(tmp_path):
    rng = np.random.default_rng(1)
    path = tmp_path / "gauss_coords.tsv"
    with open(path, "w") as fh:
        fh.write("id\tx\ty\tuncertainty\n")
        for i in range(1, KARATE_NODES + 1):
            fh.write(f"{i}\t{rng.normal():.6f}\t{rng.normal():.6f}"
                     f"\t{rng.uniform(0.1, 0.8):.6f}\n")
    return str(path)


@pytest.fixture
def variance_csv(tmp_path):
    path = tmp_path / "variance.csv"
    with open(path, "w") as fh:
        fh.write("epoch,dim,mean_sigma\n")
        for e in range(50):
            fh.write(f"{e},0,{1.0 + 0.01 * e}\n")
            fh.write(f"{e},1,{1.0 - 0.005 * e}\n")
    return str(path)


def test_scatter_karate(karate_coords, karate_labels, tmp_path):
    out = tmp_path / "scatter.png"
    info = render(FigureSpec("scatter", str(out), coords_path=karate_coords,
                             labels_path=karate_labels))
    assert info.points == 34
    assert info.colors == 2
    assert out.exists() and os.path.getsize(out) > 0


def test_ellipse_one_per_node(gaussian_coords, tmp_path):
    out = tmp_path / "ellipse.png"
    info = render(FigureSpec("ellipse", str(out), coords_path=gaussian_coords,
                             ellipse_scale=2.0))
    assert info.ellipses == 34
    assert info.points == 34
    assert out.exists() and os.path.getsize(out) > 0


def test_variance_curves_shape(variance_csv, tmp_path):
    out = tmp_path / "curves.png"
    info = render(FigureSpec("variance_curves", str(out),
                             variances_path=variance_csv))
    assert info.curves == 2
    assert info.curve_length == 50
    assert out.exists() and os.path.getsize(out) > 0


def test_rendering_is_structurally_deterministic(karate_coords, karate_labels,
                                                 tmp_path):
    a = render(FigureSpec("scatter", str(tmp_path / "a.png"),
                          coords_path=karate_coords, labels_path=karate_labels))
    b = render(FigureSpec("scatter", str(tmp_path / "b.png"),
                          coords_path=karate_coords, labels_path=karate_labels))
    assert (a.points, a.colors) == (b.points, b.colors)


def test_inputs_not_modified(gaussian_coords, tmp_path):
    before = open(gaussian_coords).read()
    render(FigureSpec("ellipse", str(tmp_path / "e.png"),
                      coords_path=gaussian_coords))
    assert open(gaussian_coords).read() == before


def test_ellipse_missing_uncertainty_column_named(karate_coords, tmp_path):
    with pytest.raises(SchemaError, match="uncertainty"):
        render(FigureSpec("ellipse", str(tmp_path / "x.png"),
                          coords_path=karate_coords))


def test_missing_coordinate_column_named(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("id\tx\n1\t0.5\n")
    with pytest.raises(SchemaError, match="'y'"):
        render(FigureSpec("scatter", str(tmp_path / "x.png"),
                          coords_path=str(bad)))


def test_variance_missing_column_named(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("epoch,dim,sigma\n0,0,1.0\n")
    with pytest.raises(SchemaError, match="mean_sigma"):
        read_variances(str(bad))


def test_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        FigureSpec("heatmap", str(tmp_path / "x.png"))
    with pytest.raises(ValueError):
        FigureSpec("scatter", str(tmp_path / "x.png"))
    with pytest.raises(FileNotFoundError):
        FigureSpec("scatter", str(tmp_path / "x.png"),
                   coords_path=str(tmp_path / "nope.tsv"))


def test_cli_end_to_end(karate_coords, karate_labels, variance_csv, tmp_path):
    out = tmp_path / "fig.png"
    code = main(["scatter", "--coords", karate_coords, "--labels",
                 karate_labels, "--out", str(out)])
    assert code == 0 and out.exists()
    code = main(["variance_curves", "--variances", variance_csv,
                 "--out", str(tmp_path / "v.png")])
    assert code == 0


def test_cli_schema_error_exit_code(karate_coords, tmp_path):
    code = main(["ellipse", "--coords", karate_coords,
                 "--out", str(tmp_path / "x.png")])
    assert code == 1


def test_cli_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["scatter", "--out", str(tmp_path / "x.png")])
    assert exc.value.code == 2
