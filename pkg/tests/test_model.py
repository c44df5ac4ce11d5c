import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blockrank.model import BlockDesign, DesignError, Ranking, TournamentGraph, validate_design


def test_valid_design_has_no_violations():
    design = BlockDesign.from_blocks(4, [(0, 1), (2, 3), (1, 2)])
    assert validate_design(design) == []
    assert design.k == 2
    assert design.b == 3
    assert design.replication == (1, 2, 2, 1)
    assert design.r is None
    assert design.total_slots == 6


def test_duplicate_item_reported_with_block_index():
    design = BlockDesign(v=3, k=3, blocks=((0, 1, 1), (2,)))
    violations = validate_design(design)
    assert [(x.block, "duplicate item [1]" in x.message) for x in violations] == [(0, True)]


@pytest.mark.parametrize("blocks, needle", [
    (((0, 5),), "out of range"),
    (((0, 1), ()), "empty block"),
    (((0, 1, 2),), "exceeds k"),
])
def test_structural_violations(blocks, needle):
    design = BlockDesign(v=3, k=2, blocks=blocks)
    assert any(needle in v.message for v in validate_design(design))


def test_uncovered_items_reported():
    design = BlockDesign(v=5, k=2, blocks=((0, 1), (1, 2)))
    assert any("never appear" in v.message for v in validate_design(design))


def test_incidence_matrix():
    design = BlockDesign.from_blocks(3, [(0, 2), (1, 2)])
    np.testing.assert_array_equal(design.incidence(), [[1, 0, 1], [0, 1, 1]])


def test_text_round_trip(tmp_path):
    design = BlockDesign.from_blocks(6, [(0, 1, 2), (3, 4, 5), (0, 3, 5)], family="random")
    path = tmp_path / "d.txt"
    design.save(path)
    loaded = BlockDesign.load(path)
    assert loaded.blocks == design.blocks
    assert (loaded.v, loaded.k) == (6, 3)


def test_from_text_rejects_bad_header():
    with pytest.raises(DesignError):
        BlockDesign.from_text("3 2\n0 1\n")


def test_tournament_from_triplets_rejects_self_loops():
    with pytest.raises(ValueError):
        TournamentGraph.from_triplets(3, [(1, 1, 1.0)])


def test_tournament_graph_is_read_only():
    g = TournamentGraph.from_triplets(2, [(0, 1, 2.0)])
    assert g.total_weight == 2.0
    assert g.triplets() == [(0, 1, 2.0)]
    with pytest.raises(ValueError):
        g.wins[0, 1] = 5


def test_ranking_rejects_non_permutations_and_nan_scores():
    with pytest.raises(ValueError):
        Ranking((0, 0, 1))
    with pytest.raises(ValueError):
        Ranking((0, 1), (0.5, float("nan")))


@given(st.permutations(list(range(12))))
def test_positions_inverts_order(perm):
    ranking = Ranking(tuple(perm))
    pos = ranking.positions()
    assert all(ranking.order[pos[i]] == i for i in range(len(perm)))
