"""Deterministic generator of synthetic records in the NSL-KDD text format.

The real dataset is user-supplied. This generator produces files with the same
43-column layout, the full protocol/service/flag vocabularies (so the encoded
width is 122, as with the real training set) and class-dependent numeric
structure strong enough for the model to learn. The shipped 500-row fixture
``scgnet/data/nslkdd_fixture.txt`` is ``generate_records(500, seed=0)``.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .dataset import DEFAULT_SCHEMA, FEATURE_NAMES, MAX_DIFFICULTY, AttackTaxonomy, ClassLabel, RawRecord, write_records

PROTOCOLS = ("icmp", "tcp", "udp")
FLAGS = ("OTH", "REJ", "RSTO", "RSTOS0", "RSTR", "S0", "S1", "S2", "S3", "SF", "SH")
SERVICES = (
    "IRC", "X11", "Z39_50", "aol", "auth", "bgp", "courier", "csnet_ns", "ctf", "daytime",
    "discard", "domain", "domain_u", "echo", "eco_i", "ecr_i", "efs", "exec", "finger", "ftp",
    "ftp_data", "gopher", "harvest", "hostnames", "http", "http_2784", "http_443", "http_8001", "imap4",
    "iso_tsap", "klogin", "kshell", "ldap", "link", "login", "mtp", "name", "netbios_dgm", "netbios_ns",
    "netbios_ssn", "netstat", "nnsp", "nntp", "ntp_u", "other", "pm_dump", "pop_2", "pop_3", "printer",
    "private", "red_i", "remote_job", "rje", "shell", "smtp", "sql_net", "ssh", "sunrpc", "supdup",
    "systat", "telnet", "tftp_u", "tim_i", "time", "urh_i", "urp_i", "uucp", "uucp_path", "vmnet", "whois",
)
FIXTURE_RESOURCE = "nslkdd_fixture.txt"
DEFAULT_MIX = {
    ClassLabel.NORMAL: 0.45,
    ClassLabel.DOS: 0.30,
    ClassLabel.PROBE: 0.13,
    ClassLabel.R2L: 0.08,
    ClassLabel.U2R: 0.04,
}

_BINARY_COLS = {"land", "logged_in", "root_shell", "su_attempted", "is_host_login", "is_guest_login"}
_CONSTANT_COLS = {"num_outbound_cmds"}
# preferred (protocol, flag, services) per class
_STYLE = {
    ClassLabel.NORMAL: ("tcp", "SF", ("http", "smtp", "ftp_data", "domain_u", "private")),
    ClassLabel.DOS: ("tcp", "S0", ("private", "http", "ecr_i", "telnet", "other")),
    ClassLabel.PROBE: ("icmp", "REJ", ("eco_i", "private", "other", "ecr_i", "ftp_data")),
    ClassLabel.R2L: ("tcp", "SF", ("ftp", "ftp_data", "telnet", "imap4", "http")),
    ClassLabel.U2R: ("tcp", "SF", ("telnet", "ftp_data", "ftp", "login", "other")),
}


def _class_profiles(seed: int) -> np.ndarray:
    """Per-class location of each numeric column in [0, 1]."""
    rng = np.random.default_rng([seed, 0xC1A55])
    return rng.uniform(0.0, 1.0, size=(len(ClassLabel), len(DEFAULT_SCHEMA.numeric)))


def _format(value: float, column: str) -> str:
    if column in _BINARY_COLS or column in _CONSTANT_COLS:
        return str(int(value))
    if column.endswith("rate"):
        return f"{value:.2f}"
    return str(int(round(value)))


def generate_records(n: int, seed: int = 0, mix: dict | None = None, balanced: bool = False,
                     taxonomy: AttackTaxonomy | None = None) -> list[RawRecord]:
    """``n`` synthetic records. ``balanced`` gives equal class counts (remainder to lower ids)."""
    taxonomy = taxonomy or AttackTaxonomy.default()
    rng = np.random.default_rng(seed)
    classes = list(ClassLabel)
    if balanced:
        counts = [n // len(classes) + (1 if i < n % len(classes) else 0) for i in range(len(classes))]
    else:
        weights = np.array([(mix or DEFAULT_MIX).get(c, 0.0) for c in classes], dtype=np.float64)
        counts = np.floor(weights / weights.sum() * n).astype(int)
        counts[0] += n - counts.sum()
    labels = rng.permutation(np.repeat(np.arange(len(classes)), counts))
    subclasses = {c: sorted(s for s, lab in taxonomy.mapping.items() if lab == c) for c in classes}
    profiles = _class_profiles(seed)
    numeric_names = [FEATURE_NAMES[i] for i in DEFAULT_SCHEMA.numeric]
    records = []
    for row, lab in enumerate(labels):
        cls = classes[lab]
        proto, flag, services = _STYLE[cls]
        # cycle the full vocabularies over the first rows so every category is seen
        if row < len(SERVICES):
            service = SERVICES[row]
            proto = PROTOCOLS[row % len(PROTOCOLS)]
            flag = FLAGS[row % len(FLAGS)]
        else:
            service = services[rng.integers(len(services))] if rng.random() < 0.8 else SERVICES[rng.integers(len(SERVICES))]
            if rng.random() < 0.1:
                proto = PROTOCOLS[rng.integers(len(PROTOCOLS))]
            if rng.random() < 0.1:
                flag = FLAGS[rng.integers(len(FLAGS))]
        loc = profiles[lab]
        u = np.clip(loc + rng.normal(0.0, 0.12, size=loc.shape), 0.0, 1.0)
        values = []
        for j, name in enumerate(numeric_names):
            if name in _CONSTANT_COLS:
                v = 0.0
            elif name in _BINARY_COLS:
                v = float(rng.random() < u[j] * 0.6)
            elif name.endswith("rate"):
                v = u[j]
            elif name in ("src_bytes", "dst_bytes"):
                v = np.expm1(u[j] * 9.0)
            elif name in ("count", "srv_count", "dst_host_count", "dst_host_srv_count"):
                v = u[j] * 255.0
            else:
                v = u[j] * 5.0
            values.append(_format(v, name))
        features = [""] * DEFAULT_SCHEMA.n_features
        for j, col in enumerate(DEFAULT_SCHEMA.numeric):
            features[col] = values[j]
        features[1], features[2], features[3] = proto, service, flag
        sub = subclasses[cls][rng.integers(len(subclasses[cls]))]
        records.append(RawRecord(tuple(features), sub, int(rng.integers(1, MAX_DIFFICULTY + 1))))
    return records


def write_fixture(path, n: int = 500, seed: int = 0, **kwargs) -> None:
    write_records(path, generate_records(n, seed, **kwargs))


def fixture_path():
    """Filesystem path of the shipped 500-row fixture."""
    return resources.files("scgnet.data").joinpath(FIXTURE_RESOURCE)
