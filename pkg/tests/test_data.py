import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fourierkan_gcf.data import (
    InteractionFormat,
    InteractionFormatError,
    block_of,
    compute_stats,
    generate_synthetic,
    load_interactions,
    write_interactions,
)
from fourierkan_gcf.grad import ContractError
from fourierkan_gcf.graph import InteractionGraph


def write(tmp_path, text, name="x.tsv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_assigns_first_appearance_indices(tmp_path):
    p = write(tmp_path, "# comment\nbob\tA\t5\nann\tB\t3\nbob\tB\t9\n\n")
    ds = load_interactions(p)
    assert ds.user_keys == ["bob", "ann"] and ds.item_keys == ["A", "B"]
    g = ds.graph
    assert list(zip(g.users.tolist(), g.items.tolist(), g.timestamps.tolist())) == [
        (0, 0, 5), (1, 1, 3), (0, 1, 9)
    ]
    assert ds.user_index["ann"] == 1


def test_duplicates_keep_earliest_timestamp(tmp_path):
    p = write(tmp_path, "u\ti\t8\nu\ti\t2\nu\tj\t4\n")
    g = load_interactions(p).graph
    assert g.num_edges == 2
    assert g.timestamps.tolist() == [2, 4]


def test_custom_delimiter_header_and_filter(tmp_path):
    p = write(tmp_path, "user,item,ts\na,x,1\na,y,2\nb,x,3\n")
    fmt = InteractionFormat(delimiter=",", header=True, min_user_interactions=2)
    ds = load_interactions(p, fmt)
    assert ds.user_keys == ["a"] and ds.graph.num_edges == 2


@pytest.mark.parametrize(
    "text,line",
    [("a\tb\t1\nbroken line\n", 2), ("a\tb\tnoon\n", 1), ("a\tb\t-3\n", 1), ("\tb\t1\n", 1)],
)
def test_malformed_lines_report_line_number(tmp_path, text, line):
    with pytest.raises(InteractionFormatError) as info:
        load_interactions(write(tmp_path, text))
    assert info.value.lineno == line
    assert f":{line}:" in str(info.value)


def test_empty_file_rejected(tmp_path):
    with pytest.raises(ContractError):
        load_interactions(write(tmp_path, "# nothing\n"))


@given(st.integers(0, 2**31))
def test_write_then_load_round_trip(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    pairs = rng.choice(35, int(rng.integers(1, 20)), replace=False)
    users, items = pairs // 7, pairs % 7
    g = InteractionGraph(5, 7, users, items, rng.integers(0, 100, pairs.size))
    path = tmp_path_factory.mktemp("rt") / "g.tsv"
    write_interactions(path, g, user_keys=[f"u{k}" for k in range(5)], item_keys=[f"i{k}" for k in range(7)])
    ds = load_interactions(path)
    back = {(ds.user_keys[u], ds.item_keys[i], t) for u, i, t in
            zip(ds.graph.users.tolist(), ds.graph.items.tolist(), ds.graph.timestamps.tolist())}
    want = {(f"u{u}", f"i{i}", t) for u, i, t in
            zip(users.tolist(), items.tolist(), g.timestamps.tolist())}
    assert back == want


def test_stats_examples():
    g = InteractionGraph.from_edges(2, 2, [0, 0, 1, 1], [0, 1, 0, 1])
    assert compute_stats(g).sparsity == 0.0
    g = InteractionGraph.from_edges(10, 10, range(10), range(10))
    s = compute_stats(g)
    assert (s.num_users, s.num_items, s.num_interactions) == (10, 10, 10)
    assert s.sparsity == pytest.approx(0.9)
    assert "sparsity=90.00%" in str(s)
    with pytest.raises(ContractError):
        compute_stats(InteractionGraph(2, 2, [], [], []))


def test_synthetic_default_shape():
    g = generate_synthetic(200, 100, 4, 10, 0.1, 7)
    assert g.num_edges == 2000
    assert compute_stats(g).sparsity == pytest.approx(0.9)
    assert len(set(zip(g.users.tolist(), g.items.tolist()))) == 2000
    assert np.all(np.diff(g.timestamps) > 0)
    assert np.array_equal(g.user_degrees(), np.full(200, 10))
    cross = sum(block_of(u, 200, 4) != block_of(i, 100, 4) for u, i in zip(g.users.tolist(), g.items.tolist()))
    assert cross == 200


def test_synthetic_noise_free_stays_in_block():
    g = generate_synthetic(40, 20, 2, 5, 0.0, 1)
    assert all(block_of(u, 40, 2) == block_of(i, 20, 2) for u, i in zip(g.users.tolist(), g.items.tolist()))


def test_synthetic_is_seeded():
    a, b = generate_synthetic(40, 20, 2, 5, 0.2, 3), generate_synthetic(40, 20, 2, 5, 0.2, 3)
    assert np.array_equal(a.users, b.users) and np.array_equal(a.items, b.items)
    c = generate_synthetic(40, 20, 2, 5, 0.2, 4)
    assert not np.array_equal(a.items, c.items)


@pytest.mark.parametrize("args", [(10, 10, 3, 2, 0.1), (10, 10, 2, 6, 0.1), (10, 10, 2, 2, 1.5)])
def test_synthetic_bad_arguments(args):
    with pytest.raises(ContractError):
        generate_synthetic(*args, rng_seed=0)
