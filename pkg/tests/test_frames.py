import numpy as np
import pytest

from photostat.dist import poisson_pmf, total_variation
from photostat.frames import (
    Frame,
    FrameError,
    SpotModel,
    analyze_frame_stream,
    count_blobs,
    frame_path,
    generate_frame,
    list_frames,
    read_pgm,
    write_pgm,
)

MODEL = SpotModel()
SEP = 6 * MODEL.sigma_px


def _spot_image(centres, model=MODEL, shape=(64, 64), amp=3000.0):
    yy, xx = np.mgrid[: shape[0], : shape[1]] + 0.5
    img = np.full(shape, model.baseline, dtype=float)
    for x, y in centres:
        img += amp * np.exp(-((xx - x) ** 2 + (yy - y) ** 2) / (2 * model.sigma_px**2))
    return Frame(np.rint(img).astype(np.uint16))


class TestModel:
    def test_threshold_margin_enforced(self):
        with pytest.raises(ValueError):
            SpotModel(noise_sigma=100.0, threshold=500.0)

    @pytest.mark.parametrize("kwargs", [dict(sigma_px=0), dict(amplitude_range=(10, 5)), dict(min_area_px=0)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SpotModel(**kwargs)

    def test_frame_shape(self):
        f = Frame.from_flat(3, 2, range(6), pulse_index=4)
        assert (f.width, f.height, f.pulse_index) == (3, 2, 4)
        assert f.pixels[1, 0] == 3
        with pytest.raises(ValueError):
            Frame.from_flat(3, 3, range(6))


class TestCounting:
    def test_blank(self):
        assert count_blobs(Frame(np.zeros((32, 32), dtype=np.uint16)), MODEL) == 0

    def test_noise_only_frames(self, rng):
        assert sum(count_blobs(generate_frame(0, MODEL, rng=rng), MODEL) for _ in range(100)) == 0

    def test_coincident_spots_merge(self):
        assert count_blobs(_spot_image([(30.0, 30.0), (30.0, 30.0)]), MODEL) == 1

    def test_ten_separated_spots(self, rng):
        for _ in range(20):
            assert count_blobs(generate_frame(10, MODEL, rng=rng, min_separation=SEP), MODEL) == 10

    def test_round_trip(self, rng):
        for k in list(range(1, 51)) * 2:
            frame = generate_frame(k, MODEL, rng=rng, min_separation=SEP)
            assert count_blobs(frame, MODEL) == k

    def test_scaling_invariance(self, rng):
        for k in (3, 12, 30):
            frame = generate_frame(k, MODEL, rng=rng, min_separation=SEP)
            brighter = Frame(np.minimum(frame.pixels.astype(float) * 1.25, 65535).astype(np.uint16))
            assert count_blobs(brighter, MODEL) == count_blobs(frame, MODEL) == k

    def test_dense_frame_undercounts(self, rng):
        assert count_blobs(generate_frame(300, MODEL, (1024, 1024), rng=rng), MODEL) <= 300

    def test_undercount_monotone_in_density(self, rng):
        for k in (50, 150, 300):
            means = [np.mean([count_blobs(generate_frame(k, MODEL, (s, s), rng=rng), MODEL) for _ in range(4)])
                     for s in (1024, 512, 256)]
            assert means[0] >= means[1] >= means[2]
            assert means[0] <= k

    def test_impossible_separation(self, rng):
        with pytest.raises(FrameError):
            generate_frame(500, MODEL, (32, 32), rng=rng, min_separation=SEP)


class TestStream:
    def test_identical_frames(self, rng):
        frame = generate_frame(5, MODEL, rng=rng, min_separation=SEP)
        res = analyze_frame_stream([frame] * 20, MODEL)
        assert res.histogram.counts == {5: 20}

    def test_empty_stream(self):
        with pytest.raises(FrameError):
            analyze_frame_stream([], MODEL)

    def test_permutation_invariance(self, rng):
        frames = [generate_frame(int(k), MODEL, (96, 96), rng=rng, pulse_index=i, min_separation=SEP)
                  for i, k in enumerate(rng.poisson(4, 40))]
        order = rng.permutation(len(frames))
        a = analyze_frame_stream(frames, MODEL)
        b = analyze_frame_stream([frames[i] for i in order], MODEL)
        assert a.histogram == b.histogram

    def test_poisson_stream(self, rng):
        truth = rng.poisson(16.0, 10**4)
        frames = (generate_frame(int(k), MODEL, (128, 128), rng=rng, pulse_index=i, min_separation=SEP)
                  for i, k in enumerate(truth))
        res = analyze_frame_stream(frames, MODEL)
        k_max = max(res.histogram.k_max, 50)
        assert total_variation(res.histogram.probabilities(k_max), poisson_pmf(16.0, k_max)) < 0.03
        assert [c for _, c in res.per_frame] == truth.tolist()

    def test_unreadable_frames_are_recorded(self, tmp_path, rng):
        for i in range(3):
            write_pgm(frame_path(tmp_path, i), generate_frame(i + 1, MODEL, (64, 64), rng=rng,
                                                               pulse_index=i, min_separation=SEP))
        frame_path(tmp_path, 3).write_bytes(b"P5\n64 64\n65535\n\x00\x01")
        frame_path(tmp_path, 4).write_bytes(b"garbage")
        res = analyze_frame_stream(list_frames(tmp_path), MODEL)
        assert res.histogram.counts == {1: 1, 2: 1, 3: 1}
        assert [i for i, _ in res.skipped] == [3, 4]
        assert res.summary()["skipped"][0]["index"] == 3

    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            list_frames(tmp_path / "nope")


class TestPgm:
    def test_round_trip(self, tmp_path, rng):
        frame = generate_frame(7, MODEL, (40, 30), rng=rng, pulse_index=12)
        path = tmp_path / "x.pgm"
        write_pgm(path, frame)
        back = read_pgm(path)
        np.testing.assert_array_equal(back.pixels, frame.pixels)
        assert back.pulse_index == 12 and (back.width, back.height) == (40, 30)

    def test_big_endian_raster(self, tmp_path):
        path = tmp_path / "frame_000002.pgm"
        write_pgm(path, Frame(np.array([[0x0102, 0xFFFE]], dtype=np.uint16), 2))
        data = path.read_bytes()
        assert data.startswith(b"P5")
        assert data.endswith(b"\x01\x02\xff\xfe")

    def test_index_from_name(self, tmp_path):
        path = tmp_path / "frame_000042.pgm"
        path.write_bytes(b"P5\n2 1\n65535\n\x00\x01\x00\x02")
        f = read_pgm(path)
        assert f.pulse_index == 42
        assert f.pixels.tolist() == [[1, 2]]

    def test_eight_bit(self, tmp_path):
        path = tmp_path / "a.pgm"
        path.write_bytes(b"P5 2 1 255\n\x07\x09")
        assert read_pgm(path).pixels.tolist() == [[7, 9]]

    @pytest.mark.parametrize("blob", [b"P2\n1 1\n255\n1", b"P5\n0 1\n255\n", b"P5\n1 1\n", b"P5\n2 2\n255\n\x00"])
    def test_malformed(self, tmp_path, blob):
        path = tmp_path / "bad.pgm"
        path.write_bytes(blob)
        with pytest.raises(ValueError):
            read_pgm(path)
