//! NetFlow v5 binary export format.
//!
//! v5 is a fixed-layout protocol: a 24-byte header followed by `count`
//! 48-byte flow records, all fields big-endian. Interface masks and the two
//! pad slots are not modeled; the serializer writes zeros there, so a
//! datagram round-trips byte-exactly iff those slots are zero.

use std::net::Ipv4Addr;

use thiserror::Error;

use super::FlowRecord;

pub const V5_HEADER_LEN: usize = 24;
pub const V5_RECORD_LEN: usize = 48;
const V5_VERSION: u16 = 5;

/// Header of one export datagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct V5Header {
    pub count: u16,
    pub sys_uptime: u32,
    pub unix_secs: u32,
    pub unix_nsecs: u32,
    pub flow_sequence: u32,
    pub engine_type: u8,
    pub engine_id: u8,
    pub sampling_interval: u16,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DatagramError {
    #[error("unsupported NetFlow version {0} (expected 5)")]
    UnsupportedVersion(u16),
    #[error("truncated datagram: {actual} bytes, expected {expected}")]
    TruncatedDatagram { expected: usize, actual: usize },
    #[error("field `{field}` value {value} does not fit the v5 wire format")]
    FieldOverflow { field: &'static str, value: u64 },
}

fn be16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

fn be32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

fn ip(b: &[u8]) -> Ipv4Addr {
    Ipv4Addr::new(b[0], b[1], b[2], b[3])
}

/// Parse one v5 export datagram into its flow records.
///
/// The byte length must be exactly `24 + count * 48`; trailing bytes are an
/// error. Record fields are taken as reported.
pub fn parse_v5_datagram(bytes: &[u8]) -> Result<Vec<FlowRecord>, DatagramError> {
    Ok(parse_v5_datagram_full(bytes)?.1)
}

/// Parse header and records. The header is needed to re-serialize.
pub fn parse_v5_datagram_full(
    bytes: &[u8],
) -> Result<(V5Header, Vec<FlowRecord>), DatagramError> {
    if bytes.len() < V5_HEADER_LEN {
        return Err(DatagramError::TruncatedDatagram {
            expected: V5_HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let version = be16(&bytes[0..2]);
    if version != V5_VERSION {
        return Err(DatagramError::UnsupportedVersion(version));
    }
    let count = be16(&bytes[2..4]);
    let expected = V5_HEADER_LEN + count as usize * V5_RECORD_LEN;
    if bytes.len() != expected {
        return Err(DatagramError::TruncatedDatagram {
            expected,
            actual: bytes.len(),
        });
    }
    let header = V5Header {
        count,
        sys_uptime: be32(&bytes[4..8]),
        unix_secs: be32(&bytes[8..12]),
        unix_nsecs: be32(&bytes[12..16]),
        flow_sequence: be32(&bytes[16..20]),
        engine_type: bytes[20],
        engine_id: bytes[21],
        sampling_interval: be16(&bytes[22..24]),
    };
    let mut records = Vec::with_capacity(count as usize);
    for i in 0..count as usize {
        let r = &bytes[V5_HEADER_LEN + i * V5_RECORD_LEN..V5_HEADER_LEN + (i + 1) * V5_RECORD_LEN];
        records.push(FlowRecord {
            src_ip: ip(&r[0..4]),
            dst_ip: ip(&r[4..8]),
            next_hop: ip(&r[8..12]),
            ingress_if: be16(&r[12..14]),
            egress_if: be16(&r[14..16]),
            packets: be32(&r[16..20]) as u64,
            octets: be32(&r[20..24]) as u64,
            first: be32(&r[24..28]) as u64,
            last: be32(&r[28..32]) as u64,
            src_port: be16(&r[32..34]),
            dst_port: be16(&r[34..36]),
            tcp_flags: r[37],
            protocol: r[38],
            tos: r[39],
            src_as: be16(&r[40..42]),
            dst_as: be16(&r[42..44]),
        });
    }
    Ok((header, records))
}

fn wire_u32(field: &'static str, value: u64) -> Result<u32, DatagramError> {
    u32::try_from(value).map_err(|_| DatagramError::FieldOverflow { field, value })
}

/// Serialize a header and records back to datagram bytes.
///
/// Inverse of `parse_v5_datagram_full` on its own output.
pub fn serialize_v5(header: &V5Header, records: &[FlowRecord]) -> Result<Vec<u8>, DatagramError> {
    let count = u16::try_from(records.len()).map_err(|_| DatagramError::FieldOverflow {
        field: "count",
        value: records.len() as u64,
    })?;
    let mut out = Vec::with_capacity(V5_HEADER_LEN + records.len() * V5_RECORD_LEN);
    out.extend_from_slice(&V5_VERSION.to_be_bytes());
    out.extend_from_slice(&count.to_be_bytes());
    out.extend_from_slice(&header.sys_uptime.to_be_bytes());
    out.extend_from_slice(&header.unix_secs.to_be_bytes());
    out.extend_from_slice(&header.unix_nsecs.to_be_bytes());
    out.extend_from_slice(&header.flow_sequence.to_be_bytes());
    out.push(header.engine_type);
    out.push(header.engine_id);
    out.extend_from_slice(&header.sampling_interval.to_be_bytes());
    for rec in records {
        out.extend_from_slice(&rec.src_ip.octets());
        out.extend_from_slice(&rec.dst_ip.octets());
        out.extend_from_slice(&rec.next_hop.octets());
        out.extend_from_slice(&rec.ingress_if.to_be_bytes());
        out.extend_from_slice(&rec.egress_if.to_be_bytes());
        out.extend_from_slice(&wire_u32("packets", rec.packets)?.to_be_bytes());
        out.extend_from_slice(&wire_u32("octets", rec.octets)?.to_be_bytes());
        out.extend_from_slice(&wire_u32("first", rec.first)?.to_be_bytes());
        out.extend_from_slice(&wire_u32("last", rec.last)?.to_be_bytes());
        out.extend_from_slice(&rec.src_port.to_be_bytes());
        out.extend_from_slice(&rec.dst_port.to_be_bytes());
        out.push(0); // pad1
        out.push(rec.tcp_flags);
        out.push(rec.protocol);
        out.push(rec.tos);
        out.extend_from_slice(&rec.src_as.to_be_bytes());
        out.extend_from_slice(&rec.dst_as.to_be_bytes());
        out.push(0); // src_mask
        out.push(0); // dst_mask
        out.extend_from_slice(&[0, 0]); // pad2
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn header(count: u16) -> Vec<u8> {
        let mut h = vec![0u8; V5_HEADER_LEN];
        h[0..2].copy_from_slice(&5u16.to_be_bytes());
        h[2..4].copy_from_slice(&count.to_be_bytes());
        h[4..8].copy_from_slice(&123u32.to_be_bytes()); // sys_uptime
        h[8..12].copy_from_slice(&1_700_000_000u32.to_be_bytes()); // unix_secs
        h
    }

    #[test]
    fn zero_record_datagram_parses_empty() {
        let records = parse_v5_datagram(&header(0)).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn version_9_rejected() {
        let mut bytes = header(0);
        bytes[0..2].copy_from_slice(&9u16.to_be_bytes());
        assert_eq!(
            parse_v5_datagram(&bytes),
            Err(DatagramError::UnsupportedVersion(9))
        );
    }

    #[test]
    fn short_and_trailing_bytes_rejected() {
        assert_eq!(
            parse_v5_datagram(&[0u8; 10]),
            Err(DatagramError::TruncatedDatagram {
                expected: 24,
                actual: 10
            })
        );
        let mut bytes = header(1); // claims one record, provides none
        assert_eq!(
            parse_v5_datagram(&bytes),
            Err(DatagramError::TruncatedDatagram {
                expected: 72,
                actual: 24
            })
        );
        bytes.extend_from_slice(&[0u8; V5_RECORD_LEN + 3]); // 3 trailing bytes
        assert_eq!(
            parse_v5_datagram(&bytes),
            Err(DatagramError::TruncatedDatagram {
                expected: 72,
                actual: 75
            })
        );
    }

    /// Byte layout assembled by hand, then checked field by field.
    #[test]
    fn two_record_datagram_fields_match_wire() {
        let mut bytes = header(2);
        for i in 0..2u8 {
            let mut r = vec![0u8; V5_RECORD_LEN];
            r[0..4].copy_from_slice(&[10, 0, 0, 1]); // src_ip 10.0.0.1
            r[4..8].copy_from_slice(&[10, 0, 0, 2]); // dst_ip 10.0.0.2
            r[8..12].copy_from_slice(&[192, 168, 0, 1]); // next_hop
            r[12..14].copy_from_slice(&3u16.to_be_bytes()); // ingress_if
            r[14..16].copy_from_slice(&7u16.to_be_bytes()); // egress_if
            r[16..20].copy_from_slice(&(100 + i as u32).to_be_bytes()); // packets
            r[20..24].copy_from_slice(&54_000u32.to_be_bytes()); // octets
            r[24..28].copy_from_slice(&1_000u32.to_be_bytes()); // first
            r[28..32].copy_from_slice(&2_000u32.to_be_bytes()); // last
            r[32..34].copy_from_slice(&80u16.to_be_bytes()); // src_port
            r[34..36].copy_from_slice(&443u16.to_be_bytes()); // dst_port
            r[37] = 0x18; // tcp_flags
            r[38] = 6; // protocol TCP
            r[39] = 0x10; // tos
            r[40..42].copy_from_slice(&64500u16.to_be_bytes()); // src_as
            r[42..44].copy_from_slice(&64501u16.to_be_bytes()); // dst_as
            bytes.extend_from_slice(&r);
        }
        let records = parse_v5_datagram(&bytes).unwrap();
        assert_eq!(records.len(), 2);
        for (i, rec) in records.iter().enumerate() {
            assert_eq!(rec.src_ip, Ipv4Addr::new(10, 0, 0, 1));
            assert_eq!(rec.dst_ip, Ipv4Addr::new(10, 0, 0, 2));
            assert_eq!(rec.next_hop, Ipv4Addr::new(192, 168, 0, 1));
            assert_eq!(rec.ingress_if, 3);
            assert_eq!(rec.egress_if, 7);
            assert_eq!(rec.packets, 100 + i as u64);
            assert_eq!(rec.octets, 54_000);
            assert_eq!(rec.first, 1_000);
            assert_eq!(rec.last, 2_000);
            assert_eq!(rec.src_port, 80);
            assert_eq!(rec.dst_port, 443);
            assert_eq!(rec.tcp_flags, 0x18);
            assert_eq!(rec.protocol, 6);
            assert_eq!(rec.tos, 0x10);
            assert_eq!(rec.src_as, 64500);
            assert_eq!(rec.dst_as, 64501);
        }
    }

    pub(crate) fn random_record(rng: &mut ChaCha8Rng) -> FlowRecord {
        let first = rng.gen_range(0..1_000_000u64);
        let proto = *[1u8, 6, 17, 47].get(rng.gen_range(0..4)).unwrap();
        FlowRecord {
            src_ip: Ipv4Addr::from(rng.gen::<u32>()),
            dst_ip: Ipv4Addr::from(rng.gen::<u32>()),
            next_hop: Ipv4Addr::from(rng.gen::<u32>()),
            ingress_if: rng.gen_range(0..64),
            egress_if: rng.gen_range(0..64),
            packets: rng.gen_range(1..100_000),
            octets: rng.gen_range(40..4_000_000),
            first,
            last: first + rng.gen_range(0..60_000),
            src_port: if proto == 6 || proto == 17 {
                rng.gen()
            } else {
                0
            },
            dst_port: rng.gen(),
            tcp_flags: rng.gen(),
            protocol: proto,
            tos: rng.gen(),
            src_as: rng.gen(),
            dst_as: rng.gen(),
        }
    }

    #[test]
    fn serialize_parse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.gen_range(0..=30);
            let header = V5Header {
                count: n as u16,
                sys_uptime: rng.gen(),
                unix_secs: rng.gen(),
                unix_nsecs: rng.gen_range(0..1_000_000_000),
                flow_sequence: rng.gen(),
                engine_type: rng.gen(),
                engine_id: rng.gen(),
                sampling_interval: rng.gen(),
            };
            let records: Vec<FlowRecord> = (0..n).map(|_| random_record(&mut rng)).collect();
            let bytes = serialize_v5(&header, &records).unwrap();
            let (h2, r2) = parse_v5_datagram_full(&bytes).unwrap();
            assert_eq!(h2, header);
            assert_eq!(r2, records);
            let bytes2 = serialize_v5(&h2, &r2).unwrap();
            assert_eq!(bytes2, bytes);
        }
    }

    #[test]
    fn serialize_rejects_counter_overflow() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rec = random_record(&mut rng);
        rec.packets = u64::from(u32::MAX) + 1;
        let header = V5Header {
            count: 1,
            sys_uptime: 0,
            unix_secs: 0,
            unix_nsecs: 0,
            flow_sequence: 0,
            engine_type: 0,
            engine_id: 0,
            sampling_interval: 0,
        };
        assert!(matches!(
            serialize_v5(&header, &[rec]),
            Err(DatagramError::FieldOverflow {
                field: "packets",
                ..
            })
        ));
    }
}
