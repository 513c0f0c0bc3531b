import json
import random
from ipaddress import IPv4Address, IPv4Network

import pytest

from sdnsec.labels import LabelConstraint, LabelRelation, SecurityLabel
from sdnsec.policy import Action, ConstraintKind, match_pe
from sdnsec.formats import (
    PolicyParseError,
    format_compact_pe,
    parse_compact_pe,
    parse_ipv4,
    parse_network,
    parse_repository,
    serialize_repository,
)

from helpers import make_ctx, random_ctx

# Verbatim policy-database record as a restricted transit domain would store it.
DB_SAMPLE = """
[{
  "id": "21",
  "flowid": "*",
  "srcasid": "*",
  "srcassub": "10.0.0.0/25",
  "srcastype": "EDU",
  "srcastrulabel": "SL2",
  "dstasid": "*",
  "dstassub": "192.168.52.0/24",
  "dstastype": "EDU",
  "dstastrulabel": "SL4",
  "srcip": "10.0.0.2",
  "dstip": "192.168.52.72",
  "srcmac": "00:00:00:00:00:01",
  "dstmac": "00:00:00:00:01:01",
  "user": "",
  "flowcons": "*",
  "domcons": "SL2+=",
  "services": "*",
  "secprof": "conf",
  "seq": "AS1, AS2",
  "action": "allow"
}]
"""


def test_db_sample_parses_to_expected_expression():
    (pe,) = parse_repository(DB_SAMPLE)
    assert pe.id == "21"
    assert pe.action is Action.ALLOW
    assert pe.flow_id is None
    assert pe.source.subnet == IPv4Network("10.0.0.0/25")
    assert pe.source.host_ip == IPv4Address("10.0.0.2")
    assert pe.dest.host_ip == IPv4Address("192.168.52.72")
    assert pe.user is None
    assert len(pe.dom_cons) == 1
    assert pe.dom_cons[0].kind is ConstraintKind.LABEL_PATH
    assert pe.dom_cons[0].label == LabelConstraint(LabelRelation.GEQ, SecurityLabel(2))
    assert pe.path == ("AS1", "AS2")
    assert pe.services is None
    assert pe.sec_profile == frozenset({"conf"})


def test_db_sample_matches_its_flow_context():
    (pe,) = parse_repository(DB_SAMPLE)
    ctx = make_ctx(traversed_path=("AS1", "AS2"))
    assert match_pe(pe, ctx)


def test_empty_repository():
    assert parse_repository("[]") == []


def test_all_wildcard_record_matches_anything():
    record = {name: "*" for name in json.loads(DB_SAMPLE)[0]}
    record["id"] = "w"
    record["action"] = "allow"
    (pe,) = parse_repository(json.dumps([record]))
    rng = random.Random(3)
    for _ in range(100):
        assert match_pe(pe, random_ctx(rng))


def test_unknown_field_rejected():
    record = json.loads(DB_SAMPLE)[0]
    record["color"] = "red"
    with pytest.raises(PolicyParseError, match="unknown fields"):
        parse_repository(json.dumps([record]))


@pytest.mark.parametrize("missing", ["id", "action"])
def test_missing_required_field_rejected(missing):
    record = json.loads(DB_SAMPLE)[0]
    del record[missing]
    with pytest.raises(PolicyParseError, match=missing):
        parse_repository(json.dumps([record]))


def test_duplicate_id_rejected():
    records = json.loads(DB_SAMPLE) * 2
    with pytest.raises(PolicyParseError, match="duplicate id"):
        parse_repository(json.dumps(records))


def test_repository_round_trip():
    pes = parse_repository(DB_SAMPLE)
    again = parse_repository(serialize_repository(pes))
    assert again == pes


# --- compact format ---------------------------------------------------------

HTTP_PATH_PE = (
    "3 = <*, *, *, 172.56.16.04, 172.56.16.06, 48:2C:6A:1E:60:FF, *, *, *, *, 80,"
    " {Conf, Intg}, (SW1;SW5;SW4)>:<Allow>"
)
FTP_PATH_PE = (
    "4 = <*, *, *, 172.56.16.02, 172.56.16.08, 48:2C:6A:1E:59:2F, *, *, *, *,"
    " (20;21;22;23), Conf, (SW1;SW3;SW4)>:<Allow>"
)
BYOD_PE = (
    "8 = <*, *, AS2, *, (172.16.10.66), (79:c8:82:b2:7b:1a), *, Alice, *, *,"
    " (80,443), *, *>:<allow>"
)
TRANSIT_GUEST_PE = (
    "14 = <*, (10.0.0.0/25, EDU, SL1), *, *, *, *, *, *, *, SL1, (80,443), *,"
    " (AS1, AS2)>:<allow>"
)


def test_http_path_expression():
    pe = parse_compact_pe(HTTP_PATH_PE)
    assert pe.id == "3"
    assert pe.services == frozenset({80})
    assert pe.sec_profile == frozenset({"conf", "intg"})
    assert pe.path == ("SW1", "SW5", "SW4")
    assert pe.path_is_switches
    assert pe.source.host_ip == IPv4Address("172.56.16.4")
    assert pe.dest.host_ip == IPv4Address("172.56.16.6")
    assert pe.source.host_mac == "48:2c:6a:1e:60:ff"
    assert pe.action is Action.ALLOW


def test_ftp_path_expression():
    pe = parse_compact_pe(FTP_PATH_PE)
    assert pe.services == frozenset({20, 21, 22, 23})
    assert pe.sec_profile == frozenset({"conf"})
    assert pe.path == ("SW1", "SW3", "SW4")


def test_all_wildcard_allow():
    pe = parse_compact_pe("<*,*,*,*,*,*,*,*,*,*,*,*,*>:<Allow>")
    assert pe.action is Action.ALLOW
    rng = random.Random(11)
    for _ in range(50):
        assert match_pe(pe, random_ctx(rng))


def test_byod_expression_field_placement():
    # hand-built field table: position 5 is the destination host IP,
    # position 6 the source (device) MAC, position 8 the user
    pe = parse_compact_pe(BYOD_PE)
    assert pe.user == "Alice"
    assert pe.dest.as_id == "AS2"
    assert pe.dest.host_ip == IPv4Address("172.16.10.66")
    assert pe.source.host_mac == "79:c8:82:b2:7b:1a"
    assert pe.dest.host_mac is None
    assert pe.services == frozenset({80, 443})


def test_domain_descriptor_populates_selector():
    pe = parse_compact_pe(TRANSIT_GUEST_PE)
    assert pe.source.subnet == IPv4Network("10.0.0.0/25")
    assert pe.source.as_type == "EDU"
    assert pe.source.label_req == LabelConstraint(LabelRelation.EQ, SecurityLabel(1))
    assert pe.dom_cons[0].label == LabelConstraint(LabelRelation.EQ, SecurityLabel(1))
    assert pe.path == ("AS1", "AS2")


def test_action_exit_attribute():
    pe = parse_compact_pe(
        "1 = <*, (10.0.0.0/24, EDU, SL2), (192.168.52.0/24), 10.0.0.2, *, *, *, *, *,"
        " SL2+=, (80,443), conf, *>:<(1SW2, Allow)>"
    )
    assert pe.action is Action.ALLOW
    assert pe.action_exit == "1SW2"


def test_field_count_mismatch_reports_expected_vs_found():
    with pytest.raises(PolicyParseError, match="expected 13 condition fields, found 4"):
        parse_compact_pe("<*,*,*,*>:<Allow>")


def test_compact_round_trip():
    for text in [HTTP_PATH_PE, FTP_PATH_PE, BYOD_PE, TRANSIT_GUEST_PE]:
        pe = parse_compact_pe(text)
        assert parse_compact_pe(format_compact_pe(pe)) == pe


def test_cross_format_round_trip():
    pes = parse_repository(DB_SAMPLE)
    again = [parse_compact_pe(format_compact_pe(pe)) for pe in pes]
    assert again == pes


def test_validity_token_round_trips():
    pe = parse_compact_pe("t = <*,*,*,*,*,*,*,*, valid[5,9), *,*,*,*>:<Allow>")
    assert pe.validity == (5, 9)
    assert parse_compact_pe(format_compact_pe(pe)) == pe
    again = parse_repository(serialize_repository([pe]))
    assert again == [pe]


def test_rate_and_signature_tokens():
    pe = parse_compact_pe("t = <*,*,*,*,*,*,*,*, (rate<=100; sig.SYN), *,*,*,*>:<Deny>")
    kinds = {c.kind for c in pe.flow_cons}
    assert kinds == {ConstraintKind.RATE_THRESHOLD, ConstraintKind.SIGNATURE}
    assert parse_compact_pe(format_compact_pe(pe)) == pe


def test_leading_zero_addresses_normalize():
    assert parse_ipv4("172.56.16.04") == IPv4Address("172.56.16.4")
    assert parse_network("010.0.0.0/25") == IPv4Network("10.0.0.0/25")
    with pytest.raises(ValueError):
        parse_network("10.0.0.0")
