import colorsys

import numpy as np
import pytest

from vchatmod.imaging import Frame, FrameSequence, MotionConfig, TargetMap, target_map
from vchatmod.skin import (EmptyCorpusError, EmptyTargetRegionError, FaceBox,
                           SkinMask, SkinPalette, default_palette1,
                           default_palette2, default_palette3, detect_skin,
                           hsv_bin_indices, non_face_skin, rgb_to_hsv,
                           skin_proportion, target_region_bits, train_palette3,
                           user_sp)

from helpers import random_frame, rgb_from_hsv, uniform_frame


def one_pixel_frame(rgb):
    return Frame(pixels=np.array([[rgb]], dtype=np.uint8))


def single_cell_map(n=2, cell=(0, 0), tile=(10, 10), pair_index=None):
    cells = np.zeros((n, n), dtype=np.uint8)
    cells[cell] = 1
    return TargetMap(n=n, cells=cells, threshold=9.0,
                     tile_width=tile[0], tile_height=tile[1], pair_index=pair_index)


class TestHsvConversion:
    @pytest.mark.parametrize("rgb,expected_hsv", [
        ((255, 0, 0), (0.0, 1.0, 1.0)),
        ((0, 255, 0), (120.0, 1.0, 1.0)),
        ((0, 0, 255), (240.0, 1.0, 1.0)),
        ((255, 255, 0), (60.0, 1.0, 1.0)),
        ((255, 255, 255), (0.0, 0.0, 1.0)),
        ((0, 0, 0), (0.0, 0.0, 0.0)),
        ((128, 128, 128), (0.0, 0.0, 128 / 255)),
    ])
    def test_primary_colors(self, rgb, expected_hsv):
        h, s, v = rgb_to_hsv(np.array([[rgb]], dtype=np.uint8))
        assert (h[0, 0], s[0, 0], v[0, 0]) == pytest.approx(expected_hsv)

    def test_matches_colorsys_on_random_pixels(self, rng):
        pixels = rng.integers(0, 256, size=(100, 3), dtype=np.uint8)
        h, s, v = rgb_to_hsv(pixels.reshape(1, 100, 3))
        for i, (r, g, b) in enumerate(pixels):
            hh, ss, vv = colorsys.rgb_to_hsv(r / 255, g / 255, b / 255)
            assert h[0, i] == pytest.approx(hh * 360.0, abs=1e-9)
            assert s[0, i] == pytest.approx(ss, abs=1e-12)
            assert v[0, i] == pytest.approx(vv, abs=1e-12)


class TestPalettes:
    def test_palette2_accepts_hue_30(self):
        f = one_pixel_frame(rgb_from_hsv(30.0, 0.5, 0.6))
        assert detect_skin(f, default_palette2()).bits[0, 0]

    def test_palette2_rejects_hue_180(self):
        f = one_pixel_frame(rgb_from_hsv(180.0, 0.5, 0.6))
        assert not detect_skin(f, default_palette2()).bits[0, 0]

    def test_black_pixel_never_skin(self):
        f = one_pixel_frame((0, 0, 0))
        for palette in (default_palette1(), default_palette2(), default_palette3()):
            assert not detect_skin(f, palette).bits[0, 0]

    def test_palette1_subset_of_palette2(self, rng):
        p1, p2 = default_palette1(), default_palette2()
        for _ in range(20):
            f = random_frame(rng, 16, 16)
            bits1 = detect_skin(f, p1).bits
            bits2 = detect_skin(f, p2).bits
            assert not np.any(bits1 & ~bits2)

    def test_palette_validation(self):
        with pytest.raises(ValueError):
            SkinPalette(id="bad", hue_ranges=((10.0, 400.0),))
        with pytest.raises(ValueError):
            SkinPalette(id="bad")  # neither ranges nor histogram


class TestTrainPalette3:
    def test_pure_skin_bin_is_flagged(self):
        f = uniform_frame(10, 10, rgb_from_hsv(20.0, 0.5, 0.6))
        mask = SkinMask(bits=np.ones((10, 10), dtype=bool))
        palette = train_palette3([(f, mask)], min_count=20)
        assert detect_skin(f, palette).bits.all()

    def test_low_ratio_bin_not_flagged(self):
        # 10 marked plus 30 unmarked samples of the same color in one bin
        rgb = rgb_from_hsv(20.0, 0.5, 0.6)
        f = uniform_frame(40, 1, rgb)
        bits = np.zeros((1, 40), dtype=bool)
        bits[0, :10] = True
        palette = train_palette3([(f, SkinMask(bits=bits))], min_count=20)
        assert not detect_skin(f, palette).bits.any()

    def test_min_count_gate(self):
        rgb = rgb_from_hsv(20.0, 0.5, 0.6)
        f = uniform_frame(5, 1, rgb)  # only 5 samples in the bin
        mask = SkinMask(bits=np.ones((1, 5), dtype=bool))
        palette = train_palette3([(f, mask)], min_count=20)
        assert not detect_skin(f, palette).bits.any()

    def test_empty_corpus_raises(self):
        f = uniform_frame(4, 4, (10, 10, 10))
        mask = SkinMask(bits=np.zeros((4, 4), dtype=bool))
        with pytest.raises(EmptyCorpusError):
            train_palette3([(f, mask)])

    def test_counting_matches_oracle(self, rng):
        frames = [random_frame(rng, 12, 12) for _ in range(4)]
        masks = [SkinMask(bits=rng.random((12, 12)) < 0.4) for _ in range(4)]
        palette = train_palette3(list(zip(frames, masks)), ratio=0.5, min_count=3)

        skin_counts: dict[tuple, int] = {}
        totals: dict[tuple, int] = {}
        for f, m in zip(frames, masks):
            h, s, v = rgb_to_hsv(f.pixels)
            hb, sb, vb = hsv_bin_indices(h, s, v)
            for y in range(12):
                for x in range(12):
                    key = (hb[y, x], sb[y, x], vb[y, x])
                    totals[key] = totals.get(key, 0) + 1
                    if m.bits[y, x]:
                        skin_counts[key] = skin_counts.get(key, 0) + 1
        for key, total in totals.items():
            expected = total >= 3 and skin_counts.get(key, 0) / total >= 0.5
            assert palette.histogram[key] == expected


class TestNonFaceSkin:
    def test_no_face_returns_mask_unchanged(self, rng):
        mask = SkinMask(bits=rng.random((8, 8)) < 0.5)
        assert non_face_skin(mask, None) is mask

    def test_face_on_top_half_removes_top_skin(self):
        bits = np.zeros((10, 10), dtype=bool)
        bits[:5, :] = True  # skin only in the top half
        out = non_face_skin(SkinMask(bits=bits), FaceBox(0, 0, 10, 5))
        assert out.count() == 0

    def test_face_at_bottom_leaves_nothing(self):
        bits = np.ones((10, 10), dtype=bool)
        out = non_face_skin(SkinMask(bits=bits), FaceBox(0, 5, 10, 5))
        assert out.count() == 0

    def test_row_filter_matches_oracle(self, rng):
        bits = rng.random((20, 15)) < 0.5
        face = FaceBox(2, 3, 6, 4)
        out = non_face_skin(SkinMask(bits=bits), face)
        jaw = face.y + face.h
        for y in range(20):
            for x in range(15):
                expected = bits[y, x] and y > jaw
                assert out.bits[y, x] == expected

    def test_output_subset_of_input(self, rng):
        for _ in range(20):
            bits = rng.random((12, 12)) < 0.5
            face = FaceBox(int(rng.integers(0, 6)), int(rng.integers(0, 6)), 4, 4)
            out = non_face_skin(SkinMask(bits=bits), face)
            assert not np.any(out.bits & ~bits)


class TestSkinProportion:
    def test_full_coverage_is_one(self):
        mask = SkinMask(bits=np.ones((20, 20), dtype=bool))
        assert skin_proportion(mask, single_cell_map()) == 1.0

    def test_empty_mask_is_zero(self):
        mask = SkinMask(bits=np.zeros((20, 20), dtype=bool))
        assert skin_proportion(mask, single_cell_map()) == 0.0

    def test_thirty_of_hundred(self):
        bits = np.zeros((20, 20), dtype=bool)
        bits.ravel()[:300] = False
        # the (0,0) cell covers rows 0..9, cols 0..9: put 30 skin pixels there
        bits[0:3, 0:10] = True
        assert skin_proportion(SkinMask(bits=bits), single_cell_map()) == pytest.approx(0.30)

    def test_empty_region_raises(self):
        empty = TargetMap(n=2, cells=np.zeros((2, 2), dtype=np.uint8),
                          threshold=9.0, tile_width=10, tile_height=10)
        with pytest.raises(EmptyTargetRegionError):
            skin_proportion(SkinMask(bits=np.ones((20, 20), dtype=bool)), empty)

    def test_counting_oracle_on_random_instances(self, rng):
        for _ in range(30):
            n = 4
            cells = (rng.random((n, n)) < 0.4).astype(np.uint8)
            if cells.sum() == 0:
                cells[0, 0] = 1
            w, h = 21, 18  # non-divisible by 4: remainder absorption in play
            tmap = TargetMap(n=n, cells=cells, threshold=9.0,
                             tile_width=w // n, tile_height=h // n)
            bits = rng.random((h, w)) < 0.5
            got = skin_proportion(SkinMask(bits=bits), tmap)

            region = np.zeros((h, w), dtype=bool)
            bh, bw = h // n, w // n
            for r in range(n):
                for c in range(n):
                    if cells[r, c]:
                        r1 = (r + 1) * bh if r < n - 1 else h
                        c1 = (c + 1) * bw if c < n - 1 else w
                        region[r * bh:r1, c * bw:c1] = True
            want = (bits & region).sum() / region.sum()
            assert got == pytest.approx(want, abs=1e-12)
            assert 0.0 <= got <= 1.0

    def test_region_upsampling_geometry_check(self):
        tmap = single_cell_map(tile=(10, 10))
        with pytest.raises(ValueError):
            target_region_bits(tmap, 13, 20)


class TestUserSp:
    def make_seq_and_map(self, frame_a, frame_b):
        seq = FrameSequence(user_id="u", frames=(frame_a, frame_b))
        cfg = MotionConfig(n=2, diff_threshold=9.0, morphology=0)
        tmap = target_map(frame_a, frame_b, cfg, pair_index=0)
        return seq, tmap

    def test_takes_larger_of_the_two_frames(self):
        skin_rgb = rgb_from_hsv(20.0, 0.5, 0.6)
        a = uniform_frame(20, 20, (100, 100, 100))
        px = a.pixels.copy()
        px[0:10, 0:10] = skin_rgb  # one changed tile, fully skin in frame b
        b = Frame(pixels=px)
        seq, tmap = self.make_seq_and_map(a, b)
        assert tmap.area == 1
        palettes = (default_palette1(), default_palette2(), default_palette3())
        sp = user_sp(seq, tmap, [None, None], palettes)
        # frame a contributes 0.0, frame b contributes 1.0; max wins
        assert sp.sp1 == 1.0 and sp.sp2 == 1.0 and sp.sp3 == 1.0

    def test_symmetric_in_frame_order(self):
        skin_rgb = rgb_from_hsv(20.0, 0.5, 0.6)
        a = uniform_frame(20, 20, (100, 100, 100))
        px = a.pixels.copy()
        px[0:10, 0:10] = skin_rgb
        b = Frame(pixels=px)
        palettes = (default_palette1(), default_palette2(), default_palette3())
        seq_ab, map_ab = self.make_seq_and_map(a, b)
        seq_ba, map_ba = self.make_seq_and_map(b, a)
        sp_ab = user_sp(seq_ab, map_ab, [None, None], palettes)
        sp_ba = user_sp(seq_ba, map_ba, [None, None], palettes)
        assert sp_ab == sp_ba

    def test_zero_masks_give_zero_vector(self):
        a = uniform_frame(20, 20, (100, 100, 100))
        px = a.pixels.copy()
        px[0:10, 0:10] = 130  # motion without skin color
        b = Frame(pixels=px)
        seq, tmap = self.make_seq_and_map(a, b)
        palettes = (default_palette1(), default_palette2(), default_palette3())
        sp = user_sp(seq, tmap, [None, None], palettes)
        assert (sp.sp1, sp.sp2, sp.sp3) == (0.0, 0.0, 0.0)

    def test_no_motion_yields_zero_vector(self):
        a = uniform_frame(20, 20, (100, 100, 100))
        seq = FrameSequence(user_id="u", frames=(a, a))
        cfg = MotionConfig(n=2, diff_threshold=9.0, morphology=0)
        tmap = target_map(a, a, cfg, pair_index=0)
        palettes = (default_palette1(), default_palette2(), default_palette3())
        sp = user_sp(seq, tmap, [None, None], palettes)
        assert (sp.sp1, sp.sp2, sp.sp3) == (0.0, 0.0, 0.0)

    def test_max_selection_arithmetic(self):
        assert max(0.143, 0.941) == 0.941

    def test_sp1_le_sp2_on_random_frames(self, rng):
        palettes = (default_palette1(), default_palette2(), default_palette3())
        for _ in range(50):
            a = random_frame(rng, 16, 16)
            b = random_frame(rng, 16, 16)
            cfg = MotionConfig(n=2, diff_threshold=5.0, morphology=0)
            tmap = target_map(a, b, cfg, pair_index=0)
            seq = FrameSequence(user_id="u", frames=(a, b))
            sp = user_sp(seq, tmap, [None, None], palettes)
            assert sp.sp1 <= sp.sp2 + 1e-12
