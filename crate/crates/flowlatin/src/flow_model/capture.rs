//! Text capture ingest: a normalized, comma-separated dump of flow records
//! in the shape an nfdump export would be massaged into.
//!
//! Line 1 is `#capture,<start_epoch_secs>,<end_epoch_secs>`; every following
//! non-empty line is one record with 16 fixed fields.

use std::net::Ipv4Addr;
use std::str::FromStr;

use thiserror::Error;

use super::{CaptureSet, FlowRecord};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CaptureError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: flow start is after flow end")]
    InvalidTimestamps { line: usize },
}

fn parse_field<T: FromStr>(cell: &str, name: &str, line: usize) -> Result<T, CaptureError> {
    cell.trim().parse::<T>().map_err(|_| CaptureError::Parse {
        line,
        message: format!("bad {name} `{cell}`"),
    })
}

/// Parse a capture file's text into a `CaptureSet`.
pub fn parse_capture_text(text: &str) -> Result<CaptureSet, CaptureError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CaptureError::Parse {
        line: 1,
        message: "empty input, expected #capture header".to_string(),
    })?;
    let header = header.trim_end_matches('\r');
    let mut parts = header.split(',');
    if parts.next() != Some("#capture") {
        return Err(CaptureError::Parse {
            line: 1,
            message: "expected `#capture,<start>,<end>` header".to_string(),
        });
    }
    let start: u64 = parse_field(
        parts.next().unwrap_or_default(),
        "capture start",
        1,
    )?;
    let end: u64 = parse_field(parts.next().unwrap_or_default(), "capture end", 1)?;
    if parts.next().is_some() {
        return Err(CaptureError::Parse {
            line: 1,
            message: "trailing fields after capture header".to_string(),
        });
    }
    if end < start {
        return Err(CaptureError::InvalidTimestamps { line: 1 });
    }

    let mut records = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 16 {
            return Err(CaptureError::Parse {
                line: line_no,
                message: format!("expected 16 fields, found {}", cells.len()),
            });
        }
        let record = FlowRecord {
            src_ip: parse_field::<Ipv4Addr>(cells[0], "src_ip", line_no)?,
            dst_ip: parse_field::<Ipv4Addr>(cells[1], "dst_ip", line_no)?,
            next_hop: parse_field::<Ipv4Addr>(cells[2], "next_hop", line_no)?,
            ingress_if: parse_field::<u16>(cells[3], "in_if", line_no)?,
            egress_if: parse_field::<u16>(cells[4], "out_if", line_no)?,
            packets: parse_field::<u64>(cells[5], "packets", line_no)?,
            octets: parse_field::<u64>(cells[6], "octets", line_no)?,
            first: parse_field::<u64>(cells[7], "first_ms", line_no)?,
            last: parse_field::<u64>(cells[8], "last_ms", line_no)?,
            src_port: parse_field::<u16>(cells[9], "src_port", line_no)?,
            dst_port: parse_field::<u16>(cells[10], "dst_port", line_no)?,
            tcp_flags: parse_field::<u8>(cells[11], "tcp_flags", line_no)?,
            protocol: parse_field::<u8>(cells[12], "proto", line_no)?,
            tos: parse_field::<u8>(cells[13], "tos", line_no)?,
            src_as: parse_field::<u16>(cells[14], "src_as", line_no)?,
            dst_as: parse_field::<u16>(cells[15], "dst_as", line_no)?,
        };
        if record.first > record.last {
            return Err(CaptureError::InvalidTimestamps { line: line_no });
        }
        records.push(record);
    }
    Ok(CaptureSet {
        capture_start: start,
        capture_end: end,
        records,
    })
}

/// Render a capture back to its text form.
pub fn render_capture_text(capture: &CaptureSet) -> String {
    let mut out = format!(
        "#capture,{},{}\n",
        capture.capture_start, capture.capture_end
    );
    for rec in &capture.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            rec.src_ip,
            rec.dst_ip,
            rec.next_hop,
            rec.ingress_if,
            rec.egress_if,
            rec.packets,
            rec.octets,
            rec.first,
            rec.last,
            rec.src_port,
            rec.dst_port,
            rec.tcp_flags,
            rec.protocol,
            rec.tos,
            rec.src_as,
            rec.dst_as
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) const THREE_RECORDS: &str = "\
#capture,1000,1002
10.0.0.1,10.0.0.2,0.0.0.0,1,2,10,4000,0,500,4242,80,27,6,0,0,0
10.0.0.1,10.0.0.3,0.0.0.0,1,2,20,9000,100,900,4243,443,24,6,0,0,0
10.0.0.2,10.0.0.1,0.0.0.0,2,1,5,600,200,300,5353,53,0,17,0,0,0
";

    #[test]
    fn header_only_capture_is_empty() {
        let cap = parse_capture_text("#capture,10,20\n").unwrap();
        assert_eq!(cap.capture_start, 10);
        assert_eq!(cap.capture_end, 20);
        assert!(cap.records.is_empty());
    }

    #[test]
    fn three_line_fixture_parses_in_order() {
        let cap = parse_capture_text(THREE_RECORDS).unwrap();
        assert_eq!(cap.records.len(), 3);
        assert_eq!(cap.duration_secs(), 2);
        let protos: Vec<u8> = cap.records.iter().map(|r| r.protocol).collect();
        assert_eq!(protos, vec![6, 6, 17]);
        // record ids are the ingest order
        for (id, rec) in cap.iter_with_ids() {
            assert_eq!(id as usize, cap.records.iter().position(|r| r == rec).unwrap());
        }
    }

    #[test]
    fn out_of_range_port_is_positioned_error() {
        let text = "#capture,0,1\n10.0.0.1,10.0.0.2,0.0.0.0,1,2,1,40,0,0,70000,80,0,6,0,0,0\n";
        match parse_capture_text(text) {
            Err(CaptureError::Parse { line: 2, message }) => {
                assert!(message.contains("src_port"), "{message}");
            }
            other => panic!("expected positioned parse error, got {other:?}"),
        }
    }

    #[test]
    fn reversed_flow_timestamps_rejected() {
        let text = "#capture,0,1\n10.0.0.1,10.0.0.2,0.0.0.0,1,2,1,40,900,100,1,2,0,6,0,0,0\n";
        assert_eq!(
            parse_capture_text(text),
            Err(CaptureError::InvalidTimestamps { line: 2 })
        );
    }

    #[test]
    fn reversed_capture_window_rejected() {
        assert_eq!(
            parse_capture_text("#capture,20,10\n"),
            Err(CaptureError::InvalidTimestamps { line: 1 })
        );
    }

    #[test]
    fn render_parse_round_trip_and_fuzzed_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(0..20);
            let start = rng.gen_range(0..2_000_000_000u64);
            let cap = CaptureSet {
                capture_start: start,
                capture_end: start + rng.gen_range(0..4096),
                records: (0..n)
                    .map(|_| crate::flow_model::v5::tests::random_record(&mut rng))
                    .collect(),
            };
            let text = render_capture_text(&cap);
            let back = parse_capture_text(&text).unwrap();
            assert_eq!(back, cap);

            // Any single-character corruption of a digit into a letter must
            // produce a positioned error, never a bogus record.
            if !text.is_empty() {
                let mut bytes = text.clone().into_bytes();
                let pos = rng.gen_range(0..bytes.len());
                if bytes[pos].is_ascii_digit() {
                    bytes[pos] = b'x';
                    let corrupted = String::from_utf8(bytes).unwrap();
                    assert!(parse_capture_text(&corrupted).is_err());
                }
            }
        }
    }
}
