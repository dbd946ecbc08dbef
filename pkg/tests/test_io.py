import numpy as np
import pytest

from rockmap import ParseError, PointCloud, load_cloud, save_cloud

from conftest import random_cloud


@pytest.fixture
def cloud(rng):
    return random_cloud(rng, 50).with_attributes(
        intensity=np.linspace(0, 1, 50), planarity=np.linspace(1, 0, 50)
    )


class TestRoundTrips:
    @pytest.mark.parametrize("fmt,suffix", [
        ("ply-ascii", ".ply"),
        ("ply-binary-le", ".ply"),
        ("xyz-text", ".xyz"),
    ])
    def test_coordinates_round_trip(self, tmp_path, cloud, fmt, suffix):
        path = tmp_path / ("c" + suffix)
        save_cloud(cloud, path, format=fmt)
        back = load_cloud(path)
        if fmt == "ply-binary-le":
            assert np.array_equal(back.points, cloud.points)  # bit exact
        else:
            assert np.allclose(back.points, cloud.points, atol=1e-7)

    def test_binary_preserves_attributes(self, tmp_path, cloud):
        path = tmp_path / "c.ply"
        save_cloud(cloud, path, format="ply-binary-le")
        back = load_cloud(path)
        assert set(back.attributes) >= {"intensity", "planarity"}
        assert np.array_equal(back.attributes["intensity"], cloud.attributes["intensity"])

    def test_format_inferred_from_extension(self, tmp_path, cloud):
        p = tmp_path / "c.xyz"
        save_cloud(cloud, p, format="xyz-text")
        assert len(load_cloud(p)) == len(cloud)


class TestPlyParsing:
    def test_foreign_ascii_ply_with_extra_property(self, tmp_path):
        text = (
            "ply\nformat ascii 1.0\ncomment made elsewhere\n"
            "element vertex 2\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property uchar quality\n"
            "end_header\n"
            "0 0 0 7\n1.5 2.5 3.5 9\n"
        )
        p = tmp_path / "f.ply"
        p.write_text(text)
        c = load_cloud(p)
        assert len(c) == 2
        assert np.allclose(c.points[1], [1.5, 2.5, 3.5])
        assert np.array_equal(c.attributes["quality"], [7, 9])

    def test_truncated_binary_reports_offset(self, tmp_path, cloud):
        p = tmp_path / "t.ply"
        save_cloud(cloud, p, format="ply-binary-le")
        data = p.read_bytes()
        p.write_bytes(data[:-5])
        with pytest.raises(ParseError) as e:
            load_cloud(p)
        assert "byte" in str(e.value)

    def test_bad_ascii_value_reports_line(self, tmp_path):
        text = (
            "ply\nformat ascii 1.0\nelement vertex 2\n"
            "property float x\nproperty float y\nproperty float z\nend_header\n"
            "0 0 0\n0 zero 0\n"
        )
        p = tmp_path / "b.ply"
        p.write_text(text)
        with pytest.raises(ParseError) as e:
            load_cloud(p)
        assert "line" in str(e.value)

    def test_missing_header_terminator(self, tmp_path):
        p = tmp_path / "h.ply"
        p.write_text("ply\nformat ascii 1.0\nelement vertex 1\n")
        with pytest.raises(ParseError):
            load_cloud(p)

    def test_trailing_face_element_tolerated(self, tmp_path):
        text = (
            "ply\nformat ascii 1.0\n"
            "element vertex 1\n"
            "property float x\nproperty float y\nproperty float z\n"
            "element face 1\nproperty list uchar int vertex_indices\n"
            "end_header\n"
            "1 2 3\n3 0 0 0\n"
        )
        p = tmp_path / "m.ply"
        p.write_text(text)
        c = load_cloud(p)
        assert np.allclose(c.points, [[1, 2, 3]])


class TestXyz:
    def test_comments_and_blank_lines(self, tmp_path):
        p = tmp_path / "c.xyz"
        p.write_text("# header\n\n0 0 0\n1 1 1\n")
        assert len(load_cloud(p)) == 2

    def test_bad_record_reports_line(self, tmp_path):
        p = tmp_path / "c.xyz"
        p.write_text("0 0 0\n1 1\n")
        with pytest.raises(ParseError) as e:
            load_cloud(p)
        assert "2" in str(e.value)
