//! Flow records, captures, and the three analysis sections cut from a
//! capture: protocol flow, source, and destination tables.

mod capture;
pub(crate) mod v5;

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::data_model::render_float;

pub use capture::{parse_capture_text, render_capture_text, CaptureError};
pub use v5::{
    parse_v5_datagram, parse_v5_datagram_full, serialize_v5, DatagramError, V5Header,
    V5_HEADER_LEN, V5_RECORD_LEN,
};

/// One unidirectional flow: the classic seven identifying parameters
/// (interfaces, addresses, protocol, ports, ToS) plus counters, timestamps
/// and AS numbers as exported by v5.
///
/// `src_port` is the UDP/TCP source port and 0 for other protocols by
/// convention; for ICMP, `dst_port` packs `(type << 8) | code`. Records are
/// taken as reported: only `first <= last` is checked at ingest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRecord {
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub next_hop: Ipv4Addr,
    pub ingress_if: u16,
    pub egress_if: u16,
    pub packets: u64,
    pub octets: u64,
    /// Flow start, milliseconds relative to device uptime.
    pub first: u64,
    /// Flow end, milliseconds relative to device uptime.
    pub last: u64,
    pub src_port: u16,
    pub dst_port: u16,
    pub tcp_flags: u8,
    pub protocol: u8,
    pub tos: u8,
    pub src_as: u16,
    pub dst_as: u16,
}

/// An ingested capture: a time window plus records in ingest order.
/// A record's id is its position, dense from 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureSet {
    pub capture_start: u64,
    pub capture_end: u64,
    pub records: Vec<FlowRecord>,
}

impl CaptureSet {
    /// Window length in whole seconds, floored at 1 so rates stay finite.
    pub fn duration_secs(&self) -> u64 {
        (self.capture_end - self.capture_start).max(1)
    }

    pub fn iter_with_ids(&self) -> impl Iterator<Item = (u64, &FlowRecord)> {
        self.records.iter().enumerate().map(|(i, r)| (i as u64, r))
    }
}

/// Map an IP protocol number to its display name.
pub fn protocol_name(protocol: u8) -> String {
    match protocol {
        1 => "ICMP".to_string(),
        6 => "TCP".to_string(),
        17 => "UDP".to_string(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolFlowRow {
    pub record_id: u64,
    pub protocol: String,
    pub flow_per_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRow {
    pub record_id: u64,
    pub src_if: u16,
    pub src_ip: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DestinationRow {
    pub record_id: u64,
    pub dst_if: u16,
    pub dst_ip: String,
}

/// The three per-record projections of one capture. All tables carry the
/// same record_id set, which is the join key downstream analyses use.
/// The capture duration rides along because every rate is per second of it.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionTables {
    pub protocol_flow: Vec<ProtocolFlowRow>,
    pub source: Vec<SourceRow>,
    pub destination: Vec<DestinationRow>,
    pub duration_secs: u64,
}

/// Cut a capture into its three sections.
///
/// A record's flow_per_sec is the number of capture records sharing its
/// protocol divided by the capture duration in seconds (floored at 1).
pub fn sectionize(capture: &CaptureSet) -> SectionTables {
    let duration = capture.duration_secs();
    let mut per_protocol: HashMap<u8, u64> = HashMap::new();
    for rec in &capture.records {
        *per_protocol.entry(rec.protocol).or_insert(0) += 1;
    }
    let mut protocol_flow = Vec::with_capacity(capture.records.len());
    let mut source = Vec::with_capacity(capture.records.len());
    let mut destination = Vec::with_capacity(capture.records.len());
    for (record_id, rec) in capture.iter_with_ids() {
        let n_key = per_protocol[&rec.protocol];
        protocol_flow.push(ProtocolFlowRow {
            record_id,
            protocol: protocol_name(rec.protocol),
            flow_per_sec: n_key as f64 / duration as f64,
        });
        source.push(SourceRow {
            record_id,
            src_if: rec.ingress_if,
            src_ip: rec.src_ip.to_string(),
        });
        destination.push(DestinationRow {
            record_id,
            dst_if: rec.egress_if,
            dst_ip: rec.dst_ip.to_string(),
        });
    }
    SectionTables {
        protocol_flow,
        source,
        destination,
        duration_secs: duration,
    }
}

/// File names the three sections are written under.
pub const SECTION_FILES: [&str; 3] = ["NetFlow-Data1", "NetFlow-Data2", "NetFlow-Data3"];

#[derive(Debug, Error)]
pub enum SectionIoError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Write the sections as tab-separated datasets `NetFlow-Data1..3` under
/// `dir`. Columns: (record_id, protocol, flow_per_sec), (record_id, src_if,
/// src_ip), (record_id, dst_if, dst_ip).
pub fn write_sections(sections: &SectionTables, dir: &Path) -> Result<[PathBuf; 3], SectionIoError> {
    let write = |name: &str, body: String| -> Result<PathBuf, SectionIoError> {
        let path = dir.join(name);
        let mut file = fs::File::create(&path).map_err(|source| SectionIoError::Write {
            path: path.clone(),
            source,
        })?;
        file.write_all(body.as_bytes())
            .map_err(|source| SectionIoError::Write {
                path: path.clone(),
                source,
            })?;
        Ok(path)
    };
    let mut d1 = String::new();
    for row in &sections.protocol_flow {
        d1.push_str(&format!(
            "{}\t{}\t{}\n",
            row.record_id,
            row.protocol,
            render_float(row.flow_per_sec)
        ));
    }
    let mut d2 = String::new();
    for row in &sections.source {
        d2.push_str(&format!("{}\t{}\t{}\n", row.record_id, row.src_if, row.src_ip));
    }
    let mut d3 = String::new();
    for row in &sections.destination {
        d3.push_str(&format!("{}\t{}\t{}\n", row.record_id, row.dst_if, row.dst_ip));
    }
    Ok([
        write(SECTION_FILES[0], d1)?,
        write(SECTION_FILES[1], d2)?,
        write(SECTION_FILES[2], d3)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tcp_tcp_udp() -> CaptureSet {
        parse_capture_text(
            "#capture,1000,1002\n\
             10.0.0.1,10.0.0.2,0.0.0.0,1,2,10,4000,0,500,4242,80,27,6,0,0,0\n\
             10.0.0.1,10.0.0.3,0.0.0.0,1,2,20,9000,100,900,4243,443,24,6,0,0,0\n\
             10.0.0.2,10.0.0.1,0.0.0.0,2,1,5,600,200,300,5353,53,0,17,0,0,0\n",
        )
        .unwrap()
    }

    #[test]
    fn empty_capture_gives_empty_tables() {
        let cap = CaptureSet {
            capture_start: 0,
            capture_end: 10,
            records: vec![],
        };
        let s = sectionize(&cap);
        assert!(s.protocol_flow.is_empty());
        assert!(s.source.is_empty());
        assert!(s.destination.is_empty());
    }

    #[test]
    fn flow_per_sec_counts_protocol_peers_over_duration() {
        // two TCP records and one UDP over a 2 second window: 2/2 and 1/2
        let s = sectionize(&tcp_tcp_udp());
        let flows: Vec<f64> = s.protocol_flow.iter().map(|r| r.flow_per_sec).collect();
        assert_eq!(flows, vec![1.0, 1.0, 0.5]);
        let names: Vec<&str> = s.protocol_flow.iter().map(|r| r.protocol.as_str()).collect();
        assert_eq!(names, vec!["TCP", "TCP", "UDP"]);
    }

    #[test]
    fn zero_length_window_floors_to_one_second() {
        let mut cap = tcp_tcp_udp();
        cap.capture_end = cap.capture_start;
        let s = sectionize(&cap);
        assert_eq!(s.duration_secs, 1);
        assert_eq!(s.protocol_flow[0].flow_per_sec, 2.0);
    }

    #[test]
    fn tables_share_the_record_id_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let cap = CaptureSet {
                capture_start: 100,
                capture_end: 100 + rng.gen_range(0..60),
                records: (0..rng.gen_range(0..40))
                    .map(|_| v5::tests::random_record(&mut rng))
                    .collect(),
            };
            let s = sectionize(&cap);
            let n = cap.records.len();
            assert_eq!(s.protocol_flow.len(), n);
            assert_eq!(s.source.len(), n);
            assert_eq!(s.destination.len(), n);
            for i in 0..n {
                assert_eq!(s.protocol_flow[i].record_id, i as u64);
                assert_eq!(s.source[i].record_id, i as u64);
                assert_eq!(s.destination[i].record_id, i as u64);
            }
        }
    }

    #[test]
    fn sections_written_as_tsv() {
        let dir = tempfile::tempdir().unwrap();
        let s = sectionize(&tcp_tcp_udp());
        let paths = write_sections(&s, dir.path()).unwrap();
        let d1 = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(d1, "0\tTCP\t1\n1\tTCP\t1\n2\tUDP\t0.5\n");
        let d2 = std::fs::read_to_string(&paths[1]).unwrap();
        assert_eq!(d2, "0\t1\t10.0.0.1\n1\t1\t10.0.0.1\n2\t2\t10.0.0.2\n");
        let d3 = std::fs::read_to_string(&paths[2]).unwrap();
        assert_eq!(d3, "0\t2\t10.0.0.2\n1\t2\t10.0.0.3\n2\t1\t10.0.0.1\n");
    }
}
