//! Bounded per-target visual memory: at most k highest-relevance observation
//! snapshots per target, maintained online.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relevance::RelevanceBreakdown;
use crate::scene::AgentState;

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub observation_id: u64,
    pub score: RelevanceBreakdown,
    pub pose: AgentState,
    /// Textual serialization of the observation, used in answerer prompts.
    pub summary: String,
    /// Visible fraction of this entry's target at capture time.
    pub target_visibility: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetMemory {
    pub target: (String, String),
    pub capacity: usize,
    /// Descending by combined score, ties broken by smaller observation id.
    entries: Vec<MemoryEntry>,
}

impl TargetMemory {
    pub fn new(target: (String, String), capacity: usize) -> Self {
        TargetMemory {
            target,
            capacity,
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    fn ranks_before(a: &MemoryEntry, b: &MemoryEntry) -> bool {
        match a.score.combined.total_cmp(&b.score.combined) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => a.observation_id < b.observation_id,
        }
    }

    /// Insert iff the entry ranks within the top-k; evicts the current
    /// minimum when at capacity. Returns whether the entry was retained.
    pub fn insert(&mut self, entry: MemoryEntry) -> Result<bool> {
        if self
            .entries
            .iter()
            .any(|e| e.observation_id == entry.observation_id)
        {
            return Err(Error::DuplicateObservation(entry.observation_id));
        }
        let pos = self
            .entries
            .iter()
            .position(|e| Self::ranks_before(&entry, e))
            .unwrap_or(self.entries.len());
        if pos >= self.capacity {
            return Ok(false);
        }
        self.entries.insert(pos, entry);
        if self.entries.len() > self.capacity {
            self.entries.pop();
        }
        Ok(true)
    }

    pub fn best(&self) -> Option<&MemoryEntry> {
        self.entries.first()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeMemory {
    /// One bounded store per target, in stable construction order.
    per_target: Vec<TargetMemory>,
    pub capacity: usize,
}

impl EpisodeMemory {
    pub fn new(targets: &[(String, String)], capacity: usize) -> Self {
        let mut per_target: Vec<TargetMemory> = Vec::new();
        for t in targets {
            if !per_target.iter().any(|m| &m.target == t) {
                per_target.push(TargetMemory::new(t.clone(), capacity));
            }
        }
        EpisodeMemory {
            per_target,
            capacity,
        }
    }

    pub fn targets(&self) -> Vec<(String, String)> {
        self.per_target.iter().map(|m| m.target.clone()).collect()
    }

    fn store_mut(&mut self, target: &(String, String)) -> Result<&mut TargetMemory> {
        self.per_target
            .iter_mut()
            .find(|m| &m.target == target)
            .ok_or_else(|| Error::UnknownTarget {
                label: target.0.clone(),
                room: target.1.clone(),
            })
    }

    pub fn insert(&mut self, target: &(String, String), entry: MemoryEntry) -> Result<bool> {
        self.store_mut(target)?.insert(entry)
    }

    /// Entries for one target in descending-score order.
    pub fn retrieve(&self, target: &(String, String)) -> Result<&[MemoryEntry]> {
        self.per_target
            .iter()
            .find(|m| &m.target == target)
            .map(|m| m.entries())
            .ok_or_else(|| Error::UnknownTarget {
                label: target.0.clone(),
                room: target.1.clone(),
            })
    }

    /// Concatenation over targets in stable order, each score-descending.
    pub fn all_snapshots(&self) -> Vec<&MemoryEntry> {
        self.per_target
            .iter()
            .flat_map(|m| m.entries().iter())
            .collect()
    }

    pub fn total_entries(&self) -> usize {
        self.per_target.iter().map(|m| m.entries().len()).sum()
    }
}
