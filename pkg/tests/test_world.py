import math

import pytest
from hypothesis import given, settings, strategies as st

from stancelab.world import (
    DEFAULT_ROBOT_RADIUS,
    Rect,
    WorldParseError,
    WorldValidationError,
    load_world,
    load_world_text,
    rasterize,
    resolve_label,
    scan_for_label,
    serialize_world,
)


class TestLoadWorld:
    def test_bookstore_fixture_coordinates(self, bookstore):
        env = bookstore.env()
        assert env["wellness"].position == (-1.56, -1.59)
        assert env["fantasy"].position == (0.66, -4.39)
        assert env["internet"].position == (4.58, -5.64)

    def test_small_house_fixture_coordinates(self, small_house):
        env = small_house.env()
        assert env["bed"].position == (-4.4, 1.04)
        assert env["tv"].position == (0.62, -4.24)

    def test_waypoint_outside_bounds_rejected(self):
        doc = """
name = "bad"
bounds = [0.0, 0.0, 2.0, 2.0]
spawn = [1.0, 1.0, 0.0]

[[waypoints]]
label = "far"
position = [9.0, 9.0]
"""
        with pytest.raises(WorldValidationError, match="far"):
            load_world_text(doc)

    def test_parse_error_carries_line_info(self):
        with pytest.raises(WorldParseError, match="line"):
            load_world_text('name = "x"\nbounds = [oops')

    def test_duplicate_labels_rejected(self):
        doc = """
name = "dup"
bounds = [0.0, 0.0, 4.0, 4.0]
spawn = [1.0, 1.0, 0.0]

[[waypoints]]
label = "a"
position = [1.0, 1.0]

[[waypoints]]
label = "a"
position = [2.0, 2.0]
"""
        with pytest.raises(WorldValidationError, match="duplicate"):
            load_world_text(doc)

    def test_waypoint_inside_obstacle_rejected(self):
        doc = """
name = "blocked"
bounds = [0.0, 0.0, 4.0, 4.0]
spawn = [0.5, 0.5, 0.0]

[[obstacles]]
rect = [1.0, 1.0, 3.0, 3.0]

[[waypoints]]
label = "inside"
position = [2.0, 2.0]
"""
        with pytest.raises(WorldValidationError, match="inside"):
            load_world_text(doc)

    def test_serialize_load_round_trip(self, bookstore, small_house, empty_world):
        for world in (bookstore, small_house, empty_world):
            assert load_world_text(serialize_world(world)) == world


class TestResolveLabel:
    def test_alias_resolution(self, bookstore):
        assert resolve_label(bookstore, "wellness bookshelf") == "wellness"
        assert resolve_label(bookstore, "Tolkien") == "fantasy"

    def test_case_and_punctuation_insensitive(self, bookstore):
        assert resolve_label(bookstore, "  WELLNESS-BOOKSHELF! ") == "wellness"

    def test_unknown_text_is_none(self, bookstore):
        assert resolve_label(bookstore, "xyzzy") is None

    def test_identity_on_every_waypoint_label(self, bookstore, small_house):
        for world in (bookstore, small_house):
            for wp in world.waypoints:
                assert resolve_label(world, wp.label) == wp.label

    @given(st.text(max_size=40))
    @settings(max_examples=60, deadline=None)
    def test_total_over_arbitrary_text(self, text):
        world = load_world("bookstore")
        assert resolve_label(world, text) in (None, *world.labels)

    def test_scan_picks_first_mention(self, bookstore):
        text = "I need to get internet access to post about a wellness book."
        assert scan_for_label(bookstore, text) == "internet"


def brute_force_free_count(world, radius, grid):
    """Independent oracle: per-cell inflated point-in-rectangle check."""
    free = 0
    for iy in range(grid.ny):
        for ix in range(grid.nx):
            cx, cy = grid.center(ix, iy)
            occupied = False
            for obs in world.obstacles:
                dx = max(obs.xmin - cx, 0.0, cx - obs.xmax)
                dy = max(obs.ymin - cy, 0.0, cy - obs.ymax)
                if math.hypot(dx, dy) <= radius:
                    occupied = True
                    break
            if not occupied:
                free += 1
    return free


class TestRasterize:
    def test_empty_obstacles_all_free(self, empty_world):
        grid = rasterize(empty_world, 0.22)
        assert grid.free_count == grid.nx * grid.ny

    def test_single_cell_obstacle_radius_zero(self):
        doc = """
name = "one"
bounds = [0.0, 0.0, 1.0, 1.0]
spawn = [0.1, 0.1, 0.0]

[[obstacles]]
rect = [0.42, 0.42, 0.48, 0.48]
"""
        world = load_world_text(doc)
        grid = rasterize(world, robot_radius=0.0)
        occupied = [(ix, iy) for iy in range(grid.ny) for ix in range(grid.nx)
                    if grid.is_occupied_cell(ix, iy)]
        assert occupied == [(4, 4)]  # the cell whose center (0.45, 0.45) lies inside

    def test_free_count_matches_brute_force_oracle(self, bookstore):
        grid = rasterize(bookstore, DEFAULT_ROBOT_RADIUS)
        assert grid.free_count == brute_force_free_count(bookstore,
                                                         DEFAULT_ROBOT_RADIUS, grid)

    def test_grid_covers_bounds_exactly(self, bookstore):
        grid = rasterize(bookstore, 0.22)
        b = bookstore.bounds
        assert grid.nx * grid.resolution == pytest.approx(b.xmax - b.xmin)
        assert grid.ny * grid.resolution == pytest.approx(b.ymax - b.ymin)

    @given(st.floats(min_value=0.0, max_value=0.5), st.floats(min_value=0.0, max_value=0.5))
    @settings(max_examples=25, deadline=None)
    def test_monotone_in_radius(self, r1, r2):
        world = load_world("small_house")
        small, large = sorted([r1, r2])
        occ_small = rasterize(world, small).occupied
        occ_large = rasterize(world, large).occupied
        assert bool(((occ_small & ~occ_large)).any()) is False

    def test_negative_radius_rejected(self, bookstore):
        with pytest.raises(Exception):
            rasterize(bookstore, -0.1)


class TestRect:
    def test_degenerate_rejected(self):
        with pytest.raises(WorldValidationError):
            Rect(1.0, 0.0, 1.0, 2.0)

    def test_distance_to(self):
        r = Rect(0.0, 0.0, 1.0, 1.0)
        assert r.distance_to(0.5, 0.5) == 0.0
        assert r.distance_to(2.0, 0.5) == pytest.approx(1.0)
        assert r.distance_to(2.0, 2.0) == pytest.approx(math.sqrt(2))
