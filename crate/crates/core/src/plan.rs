//! Stage plans: random near-even partitions of categories or attribute
//! groups into learning stages.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::seeds;

/// Randomly partitions `items` into `stages` disjoint, near-even parts.
/// Part sizes differ by at most one; the assignment is deterministic in
/// `seed`.
pub fn make_stage_plan(items: &[usize], stages: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if stages == 0 {
        return Err(CoreError::InvalidPlan("stage count must be at least 1".into()));
    }
    if stages > items.len() {
        return Err(CoreError::InvalidPlan(format!(
            "cannot split {} items into {} stages",
            items.len(),
            stages
        )));
    }
    let mut rng = seeds::stream(seed, "stage-plan", 0);
    let order = seeds::shuffled_indices(&mut rng, items.len());

    let base = items.len() / stages;
    let extra = items.len() % stages;
    let mut parts = Vec::with_capacity(stages);
    let mut cursor = 0;
    for s in 0..stages {
        let take = base + usize::from(s < extra);
        let mut part: Vec<usize> = order[cursor..cursor + take]
            .iter()
            .map(|&i| items[i])
            .collect();
        part.sort_unstable();
        parts.push(part);
        cursor += take;
    }
    Ok(parts)
}

/// Partition of the incremental protocol into learning stages.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StagePlan {
    pub stages: usize,
    pub plan_seed: u64,
    /// Category increment: per-stage new seen categories.
    pub seen_parts: Vec<Vec<usize>>,
    /// Category increment: per-stage new unseen categories.
    pub unseen_parts: Vec<Vec<usize>>,
    /// Attribute increment: per-stage new attribute groups.
    pub attribute_parts: Vec<Vec<usize>>,
}

impl StagePlan {
    /// Plan for category increment: seen and unseen category sets are each
    /// split into `stages` parts.
    pub fn category_increment(
        seen: &[usize],
        unseen: &[usize],
        stages: usize,
        seed: u64,
    ) -> Result<Self> {
        let seen_parts = make_stage_plan(seen, stages, seeds::derive(seed, "seen", 0))?;
        let unseen_parts = make_stage_plan(unseen, stages, seeds::derive(seed, "unseen", 0))?;
        Ok(Self {
            stages,
            plan_seed: seed,
            seen_parts,
            unseen_parts,
            attribute_parts: Vec::new(),
        })
    }

    /// Plan for attribute increment: the attribute groups are split into
    /// `stages` parts; all categories are declared at stage 1.
    pub fn attribute_increment(group_count: usize, stages: usize, seed: u64) -> Result<Self> {
        let groups: Vec<usize> = (0..group_count).collect();
        let attribute_parts = make_stage_plan(&groups, stages, seeds::derive(seed, "attr", 0))?;
        Ok(Self {
            stages,
            plan_seed: seed,
            seen_parts: Vec::new(),
            unseen_parts: Vec::new(),
            attribute_parts,
        })
    }

    /// Sorted categories seen in stages `0..=k`.
    pub fn seen_through(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.seen_parts[..=k].iter().flatten().copied().collect();
        out.sort_unstable();
        out
    }

    /// Sorted unseen categories declared in stages `0..=k`.
    pub fn unseen_through(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.unseen_parts[..=k].iter().flatten().copied().collect();
        out.sort_unstable();
        out
    }

    /// Attribute groups through stage `k`, in stage order (the column layout
    /// of the stage attribute matrix).
    pub fn groups_through(&self, k: usize) -> Vec<usize> {
        self.attribute_parts[..=k].iter().flatten().copied().collect()
    }
}
