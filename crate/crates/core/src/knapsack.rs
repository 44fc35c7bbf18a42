//! Budgeted feature-group selection: maximize summed importance subject to a
//! cost ceiling, solved by dynamic programming.
//!
//! Groups that share costly producing nodes are not independent knapsack
//! items, because computing one makes the other cheaper. Such groups are
//! bundled into components; each component offers the subsets of its groups
//! as mutually exclusive options priced at their deduplicated cost, and a
//! multiple-choice knapsack DP runs over the components. The DP keeps the
//! exact Pareto frontier of (cost, importance) states rather than a
//! discretized cost axis.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::groups::{FeatureGroup, GroupCostTable};

/// Largest component whose subsets are enumerated exactly. Bigger
/// components fall back to pricing each group at its standalone cost, which
/// over-estimates cost(S) and so never exceeds the budget.
pub const MAX_COMPONENT_GROUPS: usize = 16;

/// Relative slack applied to the budget to absorb summation-order rounding.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

/// Effective ceiling used for `cost(S) <= c_max` comparisons.
pub fn budget_ceiling(c_max: f64) -> f64 {
    c_max + BUDGET_TOLERANCE * c_max.abs().max(1.0)
}

#[derive(Debug, Clone)]
struct Choice {
    cost: f64,
    value: f64,
    picks: Vec<usize>,
}

/// Returns the ids of the group set with maximum summed importance whose
/// deduplicated cost fits within `c_max`. Negative importances count as 0;
/// among equally important sets the cheapest wins.
pub fn select_feature_groups(
    groups: &[FeatureGroup],
    table: &GroupCostTable,
    c_max: f64,
) -> BTreeSet<usize> {
    let ceiling = budget_ceiling(c_max);
    let value = |ids: &[usize]| -> f64 { ids.iter().map(|&i| groups[i].importance.max(0.0)).sum() };

    let mut frontier = vec![Choice {
        cost: 0.0,
        value: 0.0,
        picks: Vec::new(),
    }];
    for component in components(groups, table) {
        let options = component_options(&component, table, &value, ceiling);
        let mut next = Vec::with_capacity(frontier.len() * options.len());
        for state in &frontier {
            for opt in &options {
                let cost = state.cost + opt.cost;
                if cost > ceiling {
                    continue;
                }
                let mut picks = state.picks.clone();
                picks.extend_from_slice(&opt.picks);
                next.push(Choice {
                    cost,
                    value: state.value + opt.value,
                    picks,
                });
            }
        }
        frontier = pareto(next);
    }

    frontier
        .pop()
        .map(|c| c.picks.into_iter().map(|i| groups[i].id).collect())
        .unwrap_or_default()
}

/// Keeps states with strictly increasing value along increasing cost.
fn pareto(mut states: Vec<Choice>) -> Vec<Choice> {
    states.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(b.value.total_cmp(&a.value)));
    let mut kept: Vec<Choice> = Vec::new();
    for s in states {
        if kept.last().is_none_or(|k| s.value > k.value) {
            kept.push(s);
        }
    }
    kept
}

/// Groups connected through shared producing nodes of positive cost.
fn components(groups: &[FeatureGroup], table: &GroupCostTable) -> Vec<Vec<usize>> {
    let n = groups.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for a in 0..n {
        for b in a + 1..n {
            let shares_cost = groups[a]
                .producing_nodes
                .intersection(&groups[b].producing_nodes)
                .any(|node| table.node_cost_us(node) > 0.0);
            if shares_cost {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = out.len();
            out.push(Vec::new());
        }
        out[slot[r]].push(i);
    }
    out.into_iter()
        .flat_map(|c| {
            if c.len() > MAX_COMPONENT_GROUPS {
                c.into_iter().map(|i| vec![i]).collect::<Vec<_>>()
            } else {
                vec![c]
            }
        })
        .collect()
}

/// Every affordable subset of a component (including the empty one), priced
/// at its deduplicated cost. Positions index into the `groups` slice.
fn component_options(
    component: &[usize],
    table: &GroupCostTable,
    value: &dyn Fn(&[usize]) -> f64,
    ceiling: f64,
) -> Vec<Choice> {
    let ids_of = |picks: &[usize]| -> Vec<usize> { picks.to_vec() };
    let mut options = Vec::new();
    for mask in 0u32..(1u32 << component.len()) {
        let picks: Vec<usize> = component
            .iter()
            .enumerate()
            .filter(|(bit, _)| mask & (1 << bit) != 0)
            .map(|(_, &i)| i)
            .collect();
        let cost = table.cost_of(&ids_of(&picks));
        if cost > ceiling {
            continue;
        }
        options.push(Choice {
            cost,
            value: value(&picks),
            picks,
        });
    }
    pareto(options)
}
