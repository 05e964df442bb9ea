import ipaddress
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipobf.packets import (
    PROTO_UDP,
    IPv4Packet,
    IPv6Packet,
    MalformedPacket,
    build_udp,
    finalize_udp4,
    finalize_udp6,
    internet_checksum,
    parse_ip,
    parse_ipv4,
    parse_ipv6,
    udp_fields,
)
from ipobf.traffic import dns_query, synthetic_server_map
from ipobf.translator import (
    ServerMapError,
    TranslationError,
    load_server_map,
    read_server_map,
    translate_4to6,
    translate_6to4,
)

from oracles import ipv4_header_ok, ones_complement_sum, udp4_ok, udp6_ok

CLIENT = int(ipaddress.IPv4Address("10.20.3.4"))
SERVER4 = int(ipaddress.IPv4Address("8.8.8.8"))
SERVER6 = int(ipaddress.IPv6Address("2001:4860:4860::8888"))
SRC6 = int(ipaddress.IPv6Address("2001:db8:1:2:4012:3456:789a:bcde"))


def dns_packet(rng=None, ttl=57, tos=0x2E):
    rng = rng or random.Random(0)
    udp = finalize_udp4(CLIENT, SERVER4, build_udp(40000, 53, dns_query(rng)))
    return IPv4Packet(CLIENT, SERVER4, PROTO_UDP, udp, ttl=ttl, tos=tos, identification=0x1234)


# -- checksum ---------------------------------------------------------------

@settings(max_examples=300)
@given(st.binary(max_size=200))
def test_fast_checksum_matches_word_loop(data):
    expected = ~ones_complement_sum(data) & 0xFFFF
    assert internet_checksum(data) == expected


def test_checksum_known_vector():
    # RFC 1071 section 3 example words
    data = bytes.fromhex("0001f203f4f5f6f7")
    assert internet_checksum(data) == ~0xDDF2 & 0xFFFF
    assert internet_checksum(b"") == 0xFFFF
    assert internet_checksum(b"\xff\xff") == 0


# -- parsing ----------------------------------------------------------------

def test_ipv4_round_trip_and_checksum():
    pkt = dns_packet()
    raw = pkt.to_bytes()
    assert ipv4_header_ok(raw)
    assert udp4_ok(raw)
    assert parse_ipv4(raw) == pkt
    assert parse_ip(raw) == pkt


def test_ipv6_round_trip():
    pkt = IPv6Packet(SRC6, SERVER6, PROTO_UDP, finalize_udp6(SRC6, SERVER6, build_udp(1, 2, b"x")),
                     hop_limit=9, traffic_class=0xB8, flow_label=0x12345)
    assert parse_ipv6(pkt.to_bytes()) == pkt


@pytest.mark.parametrize("raw", [b"", b"\x45" + b"\x00" * 10, b"\x75" + b"\x00" * 40, b"\x60" * 39])
def test_malformed_inputs(raw):
    with pytest.raises(MalformedPacket):
        parse_ip(raw)


def test_corrupted_ipv4_header_checksum_is_malformed():
    raw = bytearray(dns_packet().to_bytes())
    raw[8] ^= 1
    with pytest.raises(MalformedPacket):
        parse_ipv4(bytes(raw))


# -- server map -------------------------------------------------------------

def test_empty_map():
    m = load_server_map([])
    assert len(m) == 0
    assert m.ip4_to_6.get(SERVER4) is None


def test_519_entry_map_loads():
    m = synthetic_server_map(374 + 145, random.Random(0))
    assert len(m) == 519
    assert all(m.ip6_to_4[v6] == v4 for v4, v6 in m.ip4_to_6.items())


def test_duplicate_ipv6_rejected():
    with pytest.raises(ServerMapError, match="2001:db8::1"):
        load_server_map([("1.1.1.1", "2001:db8::1"), ("1.0.0.1", "2001:db8::1")])
    with pytest.raises(ServerMapError, match="IPv4"):
        load_server_map([("1.1.1.1", "2001:db8::1"), ("1.1.1.1", "2001:db8::2")])


def test_map_file(tmp_path):
    path = tmp_path / "servers.txt"
    path.write_text("# resolvers\n8.8.8.8,2001:4860:4860::8888\n\n1.1.1.1, 2606:4700:4700::1111\n")
    m = read_server_map(path)
    assert m.ip4_to_6[SERVER4] == SERVER6
    path.write_text("8.8.8.8;2001:4860:4860::8888\n")
    with pytest.raises(ServerMapError, match=":1:"):
        read_server_map(path)


# -- translation ------------------------------------------------------------

def test_4to6_field_preservation():
    pkt = dns_packet(ttl=57)
    out = translate_4to6(pkt, SRC6, SERVER6)
    assert out.hop_limit == 57
    assert out.traffic_class == 0x2E
    assert out.next_header == PROTO_UDP
    assert out.payload[8:] == pkt.payload[8:]
    assert udp_fields(out.payload)[:3] == udp_fields(pkt.payload)[:3]
    raw = out.to_bytes()
    assert udp6_ok(raw)
    assert udp_fields(out.payload)[3] != 0


def test_6to4_restores_fields():
    pkt = dns_packet(ttl=1, tos=0xFF)
    back = translate_6to4(translate_4to6(pkt, SRC6, SERVER6), CLIENT, SERVER4)
    assert (back.ttl, back.tos, back.protocol) == (1, 0xFF, PROTO_UDP)
    assert back.payload == pkt.payload  # same addresses, so the checksum matches too
    assert back.identification == 0 and back.flags == 0b010
    raw = back.to_bytes()
    assert ipv4_header_ok(raw)
    assert udp4_ok(raw)


def test_fragments_are_refused():
    for frag in (dict(flags=0b001), dict(frag_offset=10)):
        with pytest.raises(TranslationError) as exc:
            translate_4to6(replace(dns_packet(), **frag), SRC6, SERVER6)
        assert exc.value.reason == "fragment-unsupported"


def test_extension_headers_are_refused():
    pkt = IPv6Packet(SERVER6, SRC6, 0, b"\x11\x00" + b"\x00" * 6)
    with pytest.raises(TranslationError) as exc:
        translate_6to4(pkt, SERVER4, CLIENT)
    assert exc.value.reason == "unsupported-extension"


def test_non_udp_policy():
    tcp = IPv4Packet(CLIENT, SERVER4, 6, b"\x01\x02\x03\x04" * 5)
    out = translate_4to6(tcp, SRC6, SERVER6)
    assert out.payload == tcp.payload and out.next_header == 6
    with pytest.raises(TranslationError) as exc:
        translate_4to6(tcp, SRC6, SERVER6, allow_non_udp=False)
    assert exc.value.reason == "non-udp"


def test_bad_udp_length_is_malformed():
    udp = bytearray(dns_packet().payload)
    udp[5] ^= 0x01
    with pytest.raises(TranslationError) as exc:
        translate_4to6(replace(dns_packet(), payload=bytes(udp)), SRC6, SERVER6)
    assert exc.value.reason == "malformed"


def test_translation_is_stateless():
    pkt = dns_packet()
    a = translate_4to6(pkt, SRC6, SERVER6).to_bytes()
    b = translate_4to6(parse_ipv4(pkt.to_bytes()), SRC6, SERVER6).to_bytes()
    assert a == b


@settings(max_examples=200, deadline=None)
@given(
    src=st.integers(0, 2**32 - 1), dst=st.integers(0, 2**32 - 1),
    ttl=st.integers(0, 255), tos=st.integers(0, 255),
    sport=st.integers(0, 65535), dport=st.integers(0, 65535),
    data=st.binary(max_size=300),
    src6=st.integers(0, 2**128 - 1), dst6=st.integers(0, 2**128 - 1),
)
def test_round_trip_property(src, dst, ttl, tos, sport, dport, data, src6, dst6):
    pkt = IPv4Packet(src, dst, PROTO_UDP, finalize_udp4(src, dst, build_udp(sport, dport, data)),
                     ttl=ttl, tos=tos)
    v6 = translate_4to6(pkt, src6, dst6)
    assert udp6_ok(v6.to_bytes())
    back = translate_6to4(v6, src, dst)
    raw = back.to_bytes()
    assert ipv4_header_ok(raw) and udp4_ok(raw)
    assert (back.ttl, back.tos, back.protocol) == (ttl, tos, PROTO_UDP)
    assert udp_fields(back.payload)[:2] == (sport, dport)
    assert back.payload[8:] == data
