"""Per-packet IPv4 source obfuscation with a two-round Even-Mansour cipher.

Outbound IPv4 packets get their source address encrypted (with random
padding) and embedded in an IPv6 source address; replies are decrypted and
translated back.  See :mod:`ipobf.pipeline` for the two packet paths.
"""
from .addrcodec import EncodingLayout, V6SubnetLayout
from .cipher import AES_SBOX, CipherParams, SpnPermutation, build_permutation, decrypt, encrypt
from .keyring import KeyManager, KeySet, RotationWindow
from .pipeline import Drop, DropReason, ForwardV4, ForwardV6, PassThrough, Pipeline, PipelineConfig
from .translator import ServerMap, load_server_map

__version__ = "0.1.0"

__all__ = [
    "AES_SBOX",
    "CipherParams",
    "Drop",
    "DropReason",
    "EncodingLayout",
    "ForwardV4",
    "ForwardV6",
    "KeyManager",
    "KeySet",
    "PassThrough",
    "Pipeline",
    "PipelineConfig",
    "RotationWindow",
    "ServerMap",
    "SpnPermutation",
    "V6SubnetLayout",
    "build_permutation",
    "decrypt",
    "encrypt",
    "load_server_map",
]
