use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Channel, DayIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodTag {
    KeywordMethod,
    ClusterMethod,
}

impl MethodTag {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::KeywordMethod => "keyword",
            MethodTag::ClusterMethod => "cluster",
        }
    }
}

/// Cell coordinates; `issue` indexes [`SalienceTable::issues`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub issue: usize,
    pub day: DayIndex,
    pub channel: Channel,
}

/// Issue x day x channel counts. Only non-zero cells are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SalienceTable {
    pub method: MethodTag,
    pub issues: Vec<String>,
    pub counts: BTreeMap<CellKey, u64>,
}

impl SalienceTable {
    pub fn new(method: MethodTag, issues: Vec<String>) -> Self {
        SalienceTable {
            method,
            issues,
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, issue: usize, day: DayIndex, channel: &Channel, n: u64) {
        assert!(issue < self.issues.len(), "issue index out of range");
        if n == 0 {
            return;
        }
        *self
            .counts
            .entry(CellKey {
                issue,
                day,
                channel: channel.clone(),
            })
            .or_insert(0) += n;
    }

    pub fn get(&self, issue: usize, day: DayIndex, channel: &Channel) -> u64 {
        self.counts
            .get(&CellKey {
                issue,
                day,
                channel: channel.clone(),
            })
            .copied()
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Per-issue totals in issue order.
    pub fn issue_totals(&self) -> Vec<u64> {
        let mut totals = vec![0; self.issues.len()];
        for (k, n) in &self.counts {
            totals[k.issue] += n;
        }
        totals
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn days(&self) -> BTreeSet<DayIndex> {
        self.counts.keys().map(|k| k.day).collect()
    }

    pub fn channels(&self) -> BTreeSet<Channel> {
        self.counts.keys().map(|k| k.channel.clone()).collect()
    }

    /// issue -> day -> count, channels combined.
    pub fn by_day(&self) -> Vec<BTreeMap<DayIndex, u64>> {
        let mut out = vec![BTreeMap::new(); self.issues.len()];
        for (k, n) in &self.counts {
            *out[k.issue].entry(k.day).or_insert(0) += n;
        }
        out
    }

    /// issue -> channel -> count, days combined.
    pub fn by_channel(&self) -> Vec<BTreeMap<Channel, u64>> {
        let mut out = vec![BTreeMap::new(); self.issues.len()];
        for (k, n) in &self.counts {
            *out[k.issue].entry(k.channel.clone()).or_insert(0) += n;
        }
        out
    }

    /// Adds `other` cell-wise. Both tables must share the issue list.
    pub fn merge(&mut self, other: &SalienceTable) {
        assert_eq!(self.issues, other.issues, "merging tables over different issues");
        for (k, n) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += n;
        }
    }
}
