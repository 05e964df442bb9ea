"""Command-line front end.

Reads packets from a pcap file or a synthetic generator, pushes them
through the pipeline, optionally writes a pcap, and prints one JSON stats
object on stdout.  Settings come from a flat ``key = value`` file and are
overridden by flags.
"""
from __future__ import annotations

import argparse
import ipaddress
import json
import logging
import random
import signal
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

from . import analysis
from .addrcodec import EncodingLayout, LayoutError
from .cipher import CipherParams
from .keyring import DEFAULT_PERIOD, KeyManager, export_keys
from .packets import IPv4Packet, IPv6Packet
from .pcap import PcapError, PcapWriter, ethernet_frame, read_pcap, split_ethernet
from .pipeline import Drop, DropReason, ForwardV4, ForwardV6, PassThrough, Pipeline, PipelineConfig
from .traffic import generate_traffic, parse_gen_spec, reflect, synthetic_server_map
from .translator import ServerMapError, read_server_map

log = logging.getLogger("ipobf")

SAMPLE_SIZE = 1024
SYNTHETIC_MAP_SIZE = 519


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: int = 56
    prefix: str = "2001:db8:0:1::/64"
    internal_prefix: str = "10.0.0.0/8"
    rotate_secs: float = DEFAULT_PERIOD
    rotate_every_n: int = 0
    map: str | None = None
    input: str | None = None
    output: str | None = None
    gen: str | None = None
    reflect: bool = False
    port_obfuscation: bool = False
    unmapped_policy: str = "pass-through"
    seed: int | None = None
    rotate_now: bool = False
    workers: int = 1
    export_keys: str | None = None

    def validate(self) -> EncodingLayout:
        if self.input and self.gen:
            raise ConfigError("choose one input: --in or --gen")
        if self.reflect and not self.gen:
            raise ConfigError("--reflect needs a --gen traffic spec")
        try:
            ipaddress.IPv4Network(self.internal_prefix)
        except ValueError as exc:
            raise ConfigError(f"internal_prefix: {exc}") from None
        if self.rotate_secs <= 0:
            raise ConfigError("rotate_secs must be positive")
        try:
            return EncodingLayout.from_config(self.prefix, self.mode)
        except LayoutError as exc:
            raise ConfigError(f"layout: {exc}") from None


_ALIASES = {"in": "input", "out": "output"}
_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


def _coerce(name: str, raw: str):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    if "bool" in str(kind):
        try:
            return _BOOL[raw.strip().lower()]
        except KeyError:
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}") from None
    if "int" in str(kind) and "float" not in str(kind):
        return int(raw)
    if "float" in str(kind):
        return float(raw)
    return raw


def load_config_file(path: str | Path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = _ALIASES.get(key.strip().replace("-", "_"), key.strip().replace("-", "_"))
        if not sep or key not in {f.name for f in fields(RunConfig)}:
            raise ConfigError(f"{path}:{lineno}: unknown setting {line!r}")
        try:
            values[key] = _coerce(key, value.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ipobf", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--mode", type=int, choices=(56, 64))
    p.add_argument("--prefix", help="IPv6 prefix for encoded sources, e.g. 2001:db8::/64")
    p.add_argument("--internal-prefix", help="IPv4 prefix of the trusted network")
    p.add_argument("--map", help="server map file (<ipv4>,<ipv6> per line)")
    p.add_argument("--in", dest="input", help="input pcap")
    p.add_argument("--out", dest="output", help="output pcap (omit to discard)")
    p.add_argument("--gen", help="synthetic traffic, <dns|ntp|wireguard>:<count>")
    p.add_argument("--reflect", action="store_true", default=None,
                   help="answer generated traffic with synthetic server replies")
    p.add_argument("--seed", type=int, help="fix all randomness for reproducible runs")
    p.add_argument("--rotate-secs", type=float, help="key rotation period (live mode)")
    p.add_argument("--rotate-every-n", type=int, help="rotate every N packets (test mode)")
    p.add_argument("--port-obfuscation", action="store_true", default=None)
    p.add_argument("--unmapped-policy", choices=("pass-through", "drop"))
    p.add_argument("--rotate-now", action="store_true", default=None,
                   help="rotate once before processing")
    p.add_argument("--workers", type=int, help="worker threads for pcap input")
    p.add_argument("--export-keys", help="write retained key material here at exit")
    p.add_argument("--report", choices=("bounds", "figure6", "avalanche", "oracle"),
                   help="print an analysis report instead of processing packets")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = load_config_file(args.config) if args.config else {}
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    return RunConfig(**values)


class _Clock:
    """Deterministic timestamps for generated traffic under a fixed seed."""

    def __init__(self, fixed: bool):
        self.fixed = fixed
        self.ticks = 0

    def __call__(self) -> float:
        if self.fixed:
            self.ticks += 1
            return self.ticks * 1e-3
        return time.time()


def _split_ts(ts: float) -> tuple[int, int]:
    sec = int(ts)
    return sec, int(round((ts - sec) * 1e6)) % 1_000_000


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Execute one run; returns ``(exit_status, stats)``."""
    layout = cfg.validate()
    rng = random.Random(cfg.seed) if cfg.seed is not None else random.SystemRandom()
    n = layout.cipher_width
    params = CipherParams.generate(n, rng)
    keys = KeyManager(n, rng, cfg.rotate_secs)
    if cfg.map:
        server_map = read_server_map(cfg.map)
    else:
        server_map = synthetic_server_map(SYNTHETIC_MAP_SIZE, rng)
    pcfg = PipelineConfig(
        layout,
        ipaddress.IPv4Network(cfg.internal_prefix),
        port_obfuscation=cfg.port_obfuscation,
        unmapped_dst_policy=cfg.unmapped_policy,
    )
    pipeline = Pipeline(pcfg, server_map, params)

    if cfg.rotate_now:
        keys.rotate()
    if hasattr(signal, "SIGUSR1"):
        try:
            signal.signal(signal.SIGUSR1, lambda *_: keys.rotate())
        except ValueError:  # not on the main thread
            pass

    clock = _Clock(cfg.seed is not None)
    sink = open(cfg.output, "wb") if cfg.output else None
    writer = PcapWriter(sink) if sink else None
    sample: list[int] = []
    extra: dict = {}
    started = time.perf_counter()

    def emit(ip_bytes: bytes, macs: bytes | None, ts: tuple[int, int]):
        if writer:
            writer.write(ethernet_frame(ip_bytes, macs), *ts)

    def note_v6(pkt: IPv6Packet):
        if len(sample) < SAMPLE_SIZE:
            sample.append(pkt.src)

    try:
        if cfg.reflect:
            proto, count = parse_gen_spec(cfg.gen)
            packets = generate_traffic(proto, count, rng, pcfg.internal_prefix, server_map)
            result = reflect(
                packets, pipeline, keys, rng,
                rotate_every=cfg.rotate_every_n, keep=True,
            )
            for pkt in result.emitted:
                if isinstance(pkt, IPv6Packet):
                    note_v6(pkt)
                emit(pkt.to_bytes(), None, _split_ts(clock()))
            extra = {"restored": result.restored, "mismatched": result.mismatched}
        elif cfg.gen:
            proto, count = parse_gen_spec(cfg.gen)
            packets = generate_traffic(proto, count, rng, pcfg.internal_prefix, server_map)
            for i, pkt in enumerate(packets):
                _rotate_if_due(keys, cfg, i)
                action = pipeline.outbound(pkt, keys.snapshot(), rng)
                _emit_action(action, None, _split_ts(clock()), emit, note_v6)
        elif cfg.input:
            with open(cfg.input, "rb") as fh:
                records = list(read_pcap(fh))

            def handle(item):
                i, rec = item
                try:
                    macs, ethertype, ip = split_ethernet(rec.data)
                except PcapError as exc:
                    return rec, None, pipeline.record(Drop(DropReason.MALFORMED, str(exc)))
                return rec, macs, pipeline.process(ip, keys.snapshot(), rng)

            def indexed():
                for i, rec in enumerate(records):
                    _rotate_if_due(keys, cfg, i)
                    yield i, rec

            if cfg.workers > 1:
                with ThreadPoolExecutor(cfg.workers) as pool:
                    results = list(pool.map(handle, indexed()))
            else:
                results = map(handle, indexed())
            for rec, macs, action in results:
                if isinstance(action, PassThrough):
                    if writer:
                        writer.write(rec.data, rec.ts_sec, rec.ts_usec)
                    continue
                _emit_action(action, macs, (rec.ts_sec, rec.ts_usec), emit, note_v6)
    finally:
        if sink:
            sink.close()

    elapsed = time.perf_counter() - started
    stats = pipeline.stats()
    stats.pop("diagnostics")
    stats.update(
        rotations=keys.rotations,
        distinct_src6_sample=len(set(sample)),
        packets_per_second=round(stats["offered"] / elapsed, 1) if elapsed else 0.0,
        **extra,
    )
    if cfg.export_keys:
        Path(cfg.export_keys).write_text("\n".join(export_keys(keys.snapshot())) + "\n")
    return 0, stats


def _rotate_if_due(keys: KeyManager, cfg: RunConfig, index: int) -> None:
    if cfg.rotate_every_n:
        if index and index % cfg.rotate_every_n == 0:
            keys.rotate()
    elif cfg.seed is None:
        keys.maybe_rotate()


def _emit_action(action, macs, ts, emit, note_v6) -> None:
    if isinstance(action, ForwardV6):
        note_v6(action.packet)
        emit(action.packet.to_bytes(), macs, ts)
    elif isinstance(action, ForwardV4):
        emit(action.packet.to_bytes(), macs, ts)
    elif isinstance(action, PassThrough):
        pkt = action.packet
        if isinstance(pkt, (IPv4Packet, IPv6Packet)):
            emit(pkt.to_bytes(), macs, ts)


def _report(name: str, seed: int) -> str:
    rng = random.Random(seed)
    if name == "bounds":
        rep = {
            "battery": "bounds",
            "params": {"widths": list(analysis.FIGURE6_WIDTHS)},
            "seed": None,
            "metrics": {
                "security_bound": {n: analysis.security_bound(n) for n in analysis.FIGURE6_WIDTHS},
                "rate_limited_memory_n64": analysis.rate_limited_memory(64),
            },
        }
        return analysis.report_json(rep)
    if name == "figure6":
        return analysis.figure6_csv().rstrip("\n")
    if name == "avalanche":
        return analysis.report_json(
            analysis.avalanche_report(CipherParams.generate(64, rng), 100_000, seed)
        )
    params = CipherParams.generate(16, rng)
    keys = tuple(rng.getrandbits(16) for _ in range(3))
    rep = analysis.exhaustive_oracle(params, keys)
    return json.dumps({
        "battery": "exhaustive-oracle",
        "params": {"n": 16, "keys": list(keys)},
        "seed": seed,
        "metrics": {"passed": rep.passed, "checked": rep.checked, "failures": rep.failures},
    }, sort_keys=True)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.report:
        print(_report(args.report, args.seed or 0))
        return 0
    try:
        cfg = resolve_config(args)
        status, stats = run(cfg)
    except (ConfigError, ServerMapError, PcapError, OSError, ValueError) as exc:
        print(f"ipobf: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(stats, sort_keys=True))
    return status


if __name__ == "__main__":
    sys.exit(main())
