import pytest

from hetmem.memspec import CacheGeometry, MemoryKind, MemoryModuleSpec, MemoryPool, WritePolicy
from hetmem.workload import load_workload


def main_memory(capacity=1 << 30, read_lat=60, write_lat=60, read_e=10000, write_e=10000, leak=0):
    return MemoryModuleSpec(
        name="main_memory",
        kind=MemoryKind.MAIN_MEMORY,
        technology="DRAM",
        capacity_bytes=capacity,
        area_mm2=0,
        read_latency_ns=read_lat,
        write_latency_ns=write_lat,
        read_energy_pj=read_e,
        write_energy_pj=write_e,
        leakage_mw=leak,
    )


def cache(name, capacity, line=64, ways=8, policy=WritePolicy.WRITE_BACK, read_lat=1, write_lat=1, miss_lat=0,
          read_e=20, write_e=20, leak=10):
    return MemoryModuleSpec(
        name=name,
        kind=MemoryKind.CACHE,
        technology="SRAM",
        capacity_bytes=capacity,
        area_mm2=0,
        read_latency_ns=read_lat,
        write_latency_ns=write_lat,
        miss_latency_ns=miss_lat,
        read_energy_pj=read_e,
        write_energy_pj=write_e,
        leakage_mw=leak,
        cache_geometry=CacheGeometry(line, ways, policy),
    )


def scratchpad(name, capacity, read_lat=2, write_lat=5, read_e=100, write_e=200, leak=5):
    return MemoryModuleSpec(
        name=name,
        kind=MemoryKind.SCRATCHPAD,
        technology="STTRAM",
        capacity_bytes=capacity,
        area_mm2=0,
        read_latency_ns=read_lat,
        write_latency_ns=write_lat,
        read_energy_pj=read_e,
        write_energy_pj=write_e,
        leakage_mw=leak,
    )


def pool(caches=(), spms=(), mm=None, name="test"):
    return MemoryPool(mm or main_memory(), tuple(caches), tuple(spms), name)


def loop(it, body, lo=0, hi="N"):
    return {"for": it, "from": lo, "to": hi, "body": list(body)}


def acc(text, mode="read"):
    return {"access": text, "mode": mode}


def workload(variables, body, parameters=None, name="w"):
    """Build a Workload from compact pieces; ``variables`` maps name to
    ``(element_size, dims)`` or a full declaration dict."""
    decls = []
    for vname, spec in variables.items():
        if isinstance(spec, dict):
            decls.append({"name": vname, **spec})
        else:
            size, dims = spec
            decls.append({"name": vname, "element_size_bytes": size, "dims": list(dims)})
    return load_workload(
        {
            "name": name,
            "parameters": parameters or {},
            "variables": decls,
            "loop_nests": [{"name": "main", "body": list(body)}],
        }
    )


@pytest.fixture
def two_level_pool():
    return pool(
        caches=[cache("l1", 1024, line=64, ways=2, read_lat=1, miss_lat=1), cache("l2", 4096, ways=4, read_lat=4)],
        spms=[scratchpad("spm", 4096)],
    )
