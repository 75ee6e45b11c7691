use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use super::world::QubitId;
use super::{PartyId, ProtocolError};
use crate::mbqc::GraphSpec;
use crate::qsim::{Angle, BellLabel};

/// Everything that can travel over a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum Message {
    QubitTransfer(Vec<QubitId>),
    AngleSeq(Vec<Angle>),
    BitSeq(Vec<u8>),
    BellLabelSeq(Vec<BellLabel>),
    PositionList(Vec<usize>),
    /// Graph structure only; target angles never leave the client.
    Computation(GraphSpec),
    DecoyAnnounce {
        labels: Vec<BellLabel>,
        positions: Vec<usize>,
    },
    Abort(String),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::QubitTransfer(_) => "QubitTransfer",
            Message::AngleSeq(_) => "AngleSeq",
            Message::BitSeq(_) => "BitSeq",
            Message::BellLabelSeq(_) => "BellLabelSeq",
            Message::PositionList(_) => "PositionList",
            Message::Computation(_) => "Computation",
            Message::DecoyAnnounce { .. } => "DecoyAnnounce",
            Message::Abort(_) => "Abort",
        }
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, Message::QubitTransfer(_))
    }

    fn unexpected(self, expected: &'static str) -> ProtocolError {
        ProtocolError::UnexpectedMessage {
            expected,
            got: self.kind(),
        }
    }

    pub fn into_qubits(self) -> Result<Vec<QubitId>, ProtocolError> {
        match self {
            Message::QubitTransfer(v) => Ok(v),
            m => Err(m.unexpected("QubitTransfer")),
        }
    }

    pub fn into_angles(self) -> Result<Vec<Angle>, ProtocolError> {
        match self {
            Message::AngleSeq(v) => Ok(v),
            m => Err(m.unexpected("AngleSeq")),
        }
    }

    pub fn into_bits(self) -> Result<Vec<u8>, ProtocolError> {
        match self {
            Message::BitSeq(v) => Ok(v),
            m => Err(m.unexpected("BitSeq")),
        }
    }

    pub fn into_labels(self) -> Result<Vec<BellLabel>, ProtocolError> {
        match self {
            Message::BellLabelSeq(v) => Ok(v),
            m => Err(m.unexpected("BellLabelSeq")),
        }
    }

    pub fn into_positions(self) -> Result<Vec<usize>, ProtocolError> {
        match self {
            Message::PositionList(v) => Ok(v),
            m => Err(m.unexpected("PositionList")),
        }
    }

    pub fn into_graph(self) -> Result<GraphSpec, ProtocolError> {
        match self {
            Message::Computation(g) => Ok(g),
            m => Err(m.unexpected("Computation")),
        }
    }

    pub fn into_decoys(self) -> Result<(Vec<BellLabel>, Vec<usize>), ProtocolError> {
        match self {
            Message::DecoyAnnounce { labels, positions } => Ok((labels, positions)),
            m => Err(m.unexpected("DecoyAnnounce")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub seq: u64,
    pub from: PartyId,
    pub to: PartyId,
    #[serde(flatten)]
    pub message: Message,
}

/// Ordered log of every delivered send.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    records: Vec<Record>,
}

impl Transcript {
    pub fn push(&mut self, from: PartyId, to: PartyId, message: Message) {
        let seq = self.records.len() as u64;
        self.records.push(Record {
            seq,
            from,
            to,
            message,
        });
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Classical traffic seen by the servers: what they receive and what
    /// they report.
    pub fn bob_view(&self) -> Vec<Record> {
        self.records
            .iter()
            .filter(|r| !r.message.is_quantum() && (r.to.is_server() || r.from.is_server()))
            .cloned()
            .collect()
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_layout() {
        let mut t = Transcript::default();
        t.push(
            PartyId::Alice,
            PartyId::Bob,
            Message::AngleSeq(vec![Angle::new(3), Angle::new(9)]),
        );
        t.push(
            PartyId::Center,
            PartyId::Alice,
            Message::DecoyAnnounce {
                labels: vec![BellLabel::from_index(2)],
                positions: vec![4, 5],
            },
        );
        let lines = t.to_jsonl();
        let mut it = lines.lines();
        assert_eq!(
            it.next().unwrap(),
            r#"{"seq":0,"from":"Alice","to":"Bob","kind":"AngleSeq","payload":[3,1]}"#
        );
        assert_eq!(
            it.next().unwrap(),
            r#"{"seq":1,"from":"Center","to":"Alice","kind":"DecoyAnnounce","payload":{"labels":[[1,0]],"positions":[4,5]}}"#
        );
        let back: Record = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
        assert_eq!(&back, &t.records()[0]);
    }

    #[test]
    fn bob_view_drops_quantum_and_client_only_traffic() {
        let mut t = Transcript::default();
        t.push(
            PartyId::Center,
            PartyId::Bob,
            Message::QubitTransfer(vec![QubitId(0)]),
        );
        t.push(
            PartyId::Center,
            PartyId::Alice,
            Message::PositionList(vec![0]),
        );
        t.push(PartyId::Alice, PartyId::Bob, Message::BitSeq(vec![1]));
        t.push(PartyId::Bob, PartyId::Alice, Message::BitSeq(vec![0]));
        let v = t.bob_view();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].seq, 2);
    }
}
