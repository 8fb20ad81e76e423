import json
import os
import pathlib

import pytest

import hwdbg

FIXTURES = pathlib.Path(os.environ.get("HWDBG_FIXTURES", pathlib.Path(__file__).parents[2] / "tests" / "fixtures"))
STIMULUS = (FIXTURES / "sum_stim.txt").read_text()


@pytest.fixture
def listing():
    return hwdbg.compile((FIXTURES / "sum.mh").read_text(), "sum.mh")


def test_compile_listing(listing):
    assert listing.top == "top"
    assert listing.breakpoint_lines() == [8, 9]
    table = json.loads(listing.symtab_json())
    rows = [b for b in table["breakpoints"] if b["line"] == 9]
    assert [b["ordinal"] for b in rows] == [0, 1]
    assert "module top" in listing.netlist()


def test_syntax_error_has_location():
    with pytest.raises(hwdbg.HdlSyntaxError, match=r"bad\.mh:1:"):
        hwdbg.compile("module {", "bad.mh")


def test_optimized_drops_dead_temporary(tmp_path):
    src = (FIXTURES / "dead.mh").read_text()
    for optimized in (False, True):
        path = tmp_path / f"dead{int(optimized)}.hgdb"
        hwdbg.compile(src, "dead.mh", optimized=optimized).store_symtab(str(path))
        names = {v["source_name"] for v in hwdbg.load_symtab(str(path))["scope_variables"]}
        assert ("dead" in names) is not optimized


def test_replay_session(listing, tmp_path):
    vcd = tmp_path / "sum.vcd"
    symtab = tmp_path / "sum.hgdb"
    vcd.write_text(listing.simulate_vcd(STIMULUS))
    listing.store_symtab(str(symtab))
    host = hwdbg.Host.replay(str(vcd), str(symtab))
    try:
        client = hwdbg.Client(port=host.port)
        ids = client.request("set-breakpoint", {"file": "sum.mh", "line": 9})["payload"]["ids"]
        assert len(ids) == 2
        assert client.request("continue")["status"] == "success"
        stop = client.wait_event("stopped")["payload"]
        assert stop["threads"] == ["top"]
        assert client.request("evaluate", {"expr": "sum"})["payload"]["value"] == "0"
        r = client.request("set-value", {"name": "sum", "value": 1})
        assert (r["status"], r["reason"]) == ("error", "capability")
        del client
    finally:
        host.close()


def test_simulated_session_sets_values(listing):
    host = hwdbg.Host.simulate(listing, STIMULUS)
    try:
        client = hwdbg.Client(port=host.port)
        client.request("set-breakpoint", {"file": "sum.mh", "line": 9, "condition": "i == 1"})
        client.request("continue")
        stop = client.wait_event("stopped")["payload"]
        assert stop["time"] == 10
        r = client.request("set-value", {"name": "data[1]", "value": 7})
        assert r["payload"]["value"] == "7"
        del client
    finally:
        host.close()


def test_bench_rejects_short_workloads():
    with pytest.raises(hwdbg.HwdbgError, match="rising edges"):
        hwdbg.bench(edges=100, runs=1)
    r = hwdbg.bench(edges=10000, runs=1, conditional=2)
    assert r["edges"] == 10000
    assert r["stops"] == 0
