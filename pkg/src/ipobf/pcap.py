"""Classic libpcap file reading/writing and Ethernet framing."""
from __future__ import annotations

import struct
from typing import BinaryIO, Iterator, NamedTuple

__all__ = [
    "PcapError",
    "Record",
    "read_pcap",
    "PcapWriter",
    "split_ethernet",
    "ethernet_frame",
    "ETH_P_IP",
    "ETH_P_IPV6",
]

MAGIC = 0xA1B2C3D4
LINKTYPE_ETHERNET = 1
ETH_P_IP = 0x0800
ETH_P_IPV6 = 0x86DD
ETH_P_8021Q = 0x8100

_DEFAULT_SRC_MAC = bytes.fromhex("020000000001")
_DEFAULT_DST_MAC = bytes.fromhex("020000000002")


class PcapError(ValueError):
    pass


class Record(NamedTuple):
    ts_sec: int
    ts_usec: int
    data: bytes


def read_pcap(fh: BinaryIO) -> Iterator[Record]:
    head = fh.read(24)
    if len(head) < 24:
        raise PcapError("truncated pcap global header")
    for order in ("<", ">"):
        if struct.unpack(order + "I", head[:4])[0] == MAGIC:
            break
    else:
        raise PcapError(f"not a classic pcap file (magic {head[:4].hex()})")
    linktype = struct.unpack(order + "I", head[20:24])[0]
    if linktype != LINKTYPE_ETHERNET:
        raise PcapError(f"unsupported link type {linktype}, expected Ethernet")
    rec = struct.Struct(order + "IIII")
    while True:
        hdr = fh.read(16)
        if not hdr:
            return
        if len(hdr) < 16:
            raise PcapError("truncated record header")
        ts_sec, ts_usec, incl, _orig = rec.unpack(hdr)
        data = fh.read(incl)
        if len(data) < incl:
            raise PcapError("truncated packet data")
        yield Record(ts_sec, ts_usec, data)


class PcapWriter:
    def __init__(self, fh: BinaryIO, snaplen: int = 65535):
        self.fh = fh
        self.count = 0
        fh.write(struct.pack("<IHHiIII", MAGIC, 2, 4, 0, 0, snaplen, LINKTYPE_ETHERNET))

    def write(self, data: bytes, ts_sec: int = 0, ts_usec: int = 0) -> None:
        self.fh.write(struct.pack("<IIII", ts_sec, ts_usec, len(data), len(data)))
        self.fh.write(data)
        self.count += 1


def split_ethernet(frame: bytes) -> tuple[bytes, int, bytes]:
    """``(header_without_type, ethertype, payload)``; skips one VLAN tag."""
    if len(frame) < 14:
        raise PcapError("truncated Ethernet header")
    ethertype = struct.unpack_from("!H", frame, 12)[0]
    if ethertype == ETH_P_8021Q:
        if len(frame) < 18:
            raise PcapError("truncated VLAN tag")
        ethertype = struct.unpack_from("!H", frame, 16)[0]
        return frame[:16], ethertype, frame[18:]
    return frame[:12], ethertype, frame[14:]


def ethernet_frame(ip_packet: bytes, macs: bytes | None = None) -> bytes:
    """Wrap an IP packet; ``macs`` is the 12+ byte prefix from the input frame."""
    ethertype = ETH_P_IPV6 if ip_packet[0] >> 4 == 6 else ETH_P_IP
    if macs is None:
        macs = _DEFAULT_DST_MAC + _DEFAULT_SRC_MAC
    return macs + struct.pack("!H", ethertype) + ip_packet
