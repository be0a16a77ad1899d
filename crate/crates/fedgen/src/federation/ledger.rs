//! Communication ledger: exact per-(round, direction, client) byte counts.
//!
//! Entries are appended with the length of the frame actually encoded, so
//! totals are sums of real wire bytes, never estimates.

use crate::error::Result;
use crate::federation::wire::ClientId;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::Up => write!(f, "up"),
            Direction::Down => write!(f, "down"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerEntry {
    pub round: u32,
    pub direction: Direction,
    pub client: ClientId,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommLedger {
    pub entries: Vec<LedgerEntry>,
}

impl CommLedger {
    pub fn record(&mut self, round: u32, direction: Direction, client: ClientId, bytes: u64) {
        self.entries.push(LedgerEntry { round, direction, client, bytes });
    }

    fn sum(&self, pick: impl Fn(&LedgerEntry) -> bool) -> u64 {
        self.entries.iter().filter(|e| pick(e)).map(|e| e.bytes).sum()
    }

    pub fn uplink_bytes(&self) -> u64 {
        self.sum(|e| e.direction == Direction::Up)
    }

    pub fn downlink_bytes(&self) -> u64 {
        self.sum(|e| e.direction == Direction::Down)
    }

    pub fn total_bytes(&self) -> u64 {
        self.sum(|_| true)
    }

    pub fn client_uplink_bytes(&self, client: ClientId) -> u64 {
        self.sum(|e| e.direction == Direction::Up && e.client == client)
    }

    pub fn round_bytes(&self, round: u32) -> u64 {
        self.sum(|e| e.round == round)
    }

    /// Export: `round,direction,client_id,bytes`, in recording order.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(self.to_csv_string().as_bytes())?;
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("round,direction,client_id,bytes\n");
        for e in &self.entries {
            s.push_str(&format!("{},{},{},{}\n", e.round, e.direction, e.client, e.bytes));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_split_by_direction_and_client() {
        let mut ledger = CommLedger::default();
        ledger.record(1, Direction::Down, ClientId(0), 100);
        ledger.record(1, Direction::Up, ClientId(0), 40);
        ledger.record(2, Direction::Up, ClientId(1), 60);
        assert_eq!(ledger.total_bytes(), 200);
        assert_eq!(ledger.uplink_bytes(), 100);
        assert_eq!(ledger.downlink_bytes(), 100);
        assert_eq!(ledger.client_uplink_bytes(ClientId(0)), 40);
        assert_eq!(ledger.round_bytes(1), 140);
        let csv = ledger.to_csv_string();
        assert!(csv.starts_with("round,direction,client_id,bytes\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
