//! Driver that disentangles a symmetric short-range-correlated chain.
//!
//! The chain starts as a ring of generalized Bell pairs with two atoms
//! per site. Class-measurement rounds walk down the irrep hierarchy,
//! measuring each block, grouping the outcomes into identity-product
//! parts, compacting each part, and merging the compacted runs into
//! larger blocks. A closing round resolves every surviving block to a
//! twisted abelian basis vector, and local corrections return the chain
//! to the product of uniform-superposition blocks.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::partition::{partition_minimal, plan_compaction, OutcomeString, PartitionResult};
use super::{
    abelian_block_vector, apply_final_corrections, measure_abelian_labels, measure_block_family,
    merge_adjacent, permute_block_run, round_plans, AtomRole, Block, BlockStatus, ChainSim,
    FinalBlockRecord, FrameOp, MeasureFamily, ProtocolConfig, ProtocolError, ProtocolTrace,
    RoundRecord, Twist,
};
use crate::repr::StructureData;

fn twist_of(role: AtomRole) -> Twist {
    match role {
        AtomRole::Left(_) => Twist::GammaConj,
        AtomRole::Right(_) => Twist::Gamma,
        _ => Twist::Plain,
    }
}

/// Runs the full measurement-and-correction sequence on the Bell-pair
/// ring and reports everything observed along the way. The run can
/// only fail when some round's minimal partition needs a part longer
/// than that round's depth threshold; the returned trace then carries
/// the failure reason instead of a fidelity.
pub fn run_spt_protocol(cfg: &ProtocolConfig) -> Result<ProtocolTrace, ProtocolError> {
    cfg.validate(1)?;
    let sd = StructureData::compute(cfg.group.clone())?;
    let cocycle = cfg.cocycle.clone();
    let mut trace = ProtocolTrace::new(cfg);
    trace.aux_per_site = 2.0;
    let plans = round_plans(&sd, cfg.n_sites, cfg)?;
    trace.thresholds = plans.iter().map(|p| p.l).collect();

    let mut sim = ChainSim::short_range(&cfg.group, cfg.n_sites, cfg.backend)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut blocks: Vec<Block> = (0..cfg.n_sites)
        .map(|s| Block {
            aux: vec![2 * s, 2 * s + 1],
            phys: vec![],
            sites: 1,
            status: BlockStatus::Active,
        })
        .collect();
    trace.max_bond = sim.state.max_bond();

    for plan in &plans {
        let family = MeasureFamily::level_classes(&sd, plan.level);
        let icg = sd.class_group(plan.level);
        let class_table = icg.table.clone();

        let mut entries = Vec::with_capacity(blocks.len());
        let mut block_sites = Vec::with_capacity(blocks.len());
        let mut worst_defect = 0.0f64;
        for b in &blocks {
            let (start, len) = b.span(&sim)?;
            let out =
                measure_block_family(&mut sim, &mut rng, start, len, &family, &cfg.group, cocycle.as_ref(), None)?;
            entries.push(out.label.class);
            block_sites.push(b.sites);
            worst_defect = worst_defect.max(out.completion_defect.abs());
        }
        let product = entries
            .iter()
            .fold(class_table.identity(), |acc, &c| class_table.mul(acc, c));
        if product != class_table.identity() {
            return Err(ProtocolError::ParityViolation(format!(
                "round {} outcomes multiply to class {} instead of the identity",
                plan.round, product
            )));
        }
        let outcomes = OutcomeString {
            round: plan.round,
            entries: entries.clone(),
            block_sites,
        };

        let partition = match partition_minimal(&entries, &class_table, plan.l, false)? {
            PartitionResult::TooLong { part_start, part_len } => {
                trace.rounds.push(RoundRecord {
                    round: plan.round,
                    level: plan.level,
                    threshold: plan.l,
                    outcomes,
                    parts: vec![],
                    tail: vec![],
                    permutations: vec![],
                    swap_depth: 0,
                    max_block_sites: blocks.iter().map(|b| b.sites).max().unwrap_or(0),
                    completion_defect: worst_defect,
                });
                trace.success = false;
                trace.failure = Some(format!(
                    "round {}: minimal identity-product part of length {} starting at block {} exceeds the depth threshold {}",
                    plan.round, part_len, part_start, plan.l
                ));
                trace.max_bond = trace.max_bond.max(sim.state.max_bond());
                return Ok(trace);
            }
            PartitionResult::Split { partition, tail_start } => {
                debug_assert!(tail_start.is_none());
                partition
            }
        };

        // Compact every part in place, then fuse each bounded run of the
        // reordered outcome string into one block.
        let run_cap = class_table.order();
        let mut permutations = Vec::with_capacity(partition.parts.len());
        let mut depth = 0usize;
        for &(s, l) in &partition.parts {
            let perm = plan_compaction(&entries[s..s + l], &class_table)?;
            let d = permute_block_run(&mut sim, &mut blocks, s, &perm)?;
            depth = depth.max(d);
            permutations.push(perm);
        }
        let mut new_blocks = Vec::new();
        for (pi, &(s, _l)) in partition.parts.iter().enumerate() {
            let reordered: Vec<usize> =
                permutations[pi].iter().map(|&j| entries[s + j]).collect();
            let runs = match partition_minimal(&reordered, &class_table, run_cap, false)? {
                PartitionResult::Split { partition, .. } => partition.parts,
                PartitionResult::TooLong { .. } => {
                    return Err(ProtocolError::Internal(
                        "compacted part has a run longer than the class-group order".into(),
                    ))
                }
            };
            for &(rs, rl) in &runs {
                let mut merged = blocks[s + rs].clone();
                for k in 1..rl {
                    merged = merge_adjacent(&mut sim, merged, blocks[s + rs + k].clone())?;
                }
                new_blocks.push(merged);
            }
        }
        let site_bound = sd.lcs.term(sd.depth() - plan.round).order();
        if let Some(over) = new_blocks.iter().find(|b| b.sites > site_bound) {
            return Err(ProtocolError::Internal(format!(
                "block grew to {} sites, past the bound {} for round {}",
                over.sites, site_bound, plan.round
            )));
        }
        let max_block_sites = new_blocks.iter().map(|b| b.sites).max().unwrap_or(0);
        trace.rounds.push(RoundRecord {
            round: plan.round,
            level: plan.level,
            threshold: plan.l,
            outcomes,
            parts: partition.parts.clone(),
            tail: vec![],
            permutations,
            swap_depth: depth,
            max_block_sites,
            completion_defect: worst_defect,
        });
        trace.cumulative_depth += depth;
        trace.max_bond = trace.max_bond.max(sim.state.max_bond());
        blocks = new_blocks;
    }

    // Closing round: resolve every block to one twisted abelian basis
    // vector and queue the corrections that map it to the trivial one.
    let trivial = sd.hierarchy.level(0)[0];
    let identity = cfg.group.identity();
    for b in &blocks {
        let (start, len) = b.span(&sim)?;
        let out = measure_abelian_labels(&mut sim, &mut rng, start, len, &sd, cocycle.as_ref(), None)?;
        if out.alpha != trivial {
            trace
                .frame
                .ops
                .push((b.aux[0], FrameOp::Phase { alpha: out.alpha, adjoint: true }));
        }
        for (t, &id) in b.aux.iter().enumerate().skip(1) {
            if out.shifts[t] != identity {
                let twist = twist_of(sim.atom(id)?.role);
                trace.frame.ops.push((
                    id,
                    FrameOp::Translate { element: out.shifts[t], twist, adjoint: true },
                ));
            }
        }
        trace.final_blocks.push(FinalBlockRecord {
            atoms: b.aux.clone(),
            alpha: out.alpha,
            shifts: out.shifts,
            collapse_probability: 0.0,
            masked: false,
        });
    }
    apply_final_corrections(&mut sim, &trace.frame, &sd, cocycle.as_ref())?;
    trace.max_bond = trace.max_bond.max(sim.state.max_bond());

    // Every corrected block should now be the uniform superposition of
    // equal labels: the trivial basis vector with identity shifts.
    let mut fidelity = 1.0f64;
    for (bi, b) in blocks.iter().enumerate() {
        let (start, len) = b.span(&sim)?;
        let shifts = vec![identity; len];
        let twists: Vec<Twist> = b
            .aux
            .iter()
            .map(|&id| sim.atom(id).map(|a| twist_of(a.role)))
            .collect::<Result<_, _>>()?;
        let bra = abelian_block_vector(&cfg.group, &sd.ct, cocycle.as_ref(), trivial, &shifts, &twists, None)?;
        let p = sim.collapse(start, &bra)?;
        trace.final_blocks[bi].collapse_probability = p;
        fidelity *= p;
    }
    trace.fidelity = Some(fidelity);
    trace.success = fidelity >= 1.0 - 1e-8;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupTable;
    use crate::meas::Cocycle;
    use crate::state::Backend;
    use approx::assert_abs_diff_eq;

    fn spt_cfg(group: GroupTable, cocycle: Option<Cocycle>, n: usize, seed: u64) -> ProtocolConfig {
        let mut cfg = ProtocolConfig::new(group, n);
        cfg.cocycle = cocycle;
        cfg.seed = seed;
        cfg
    }

    #[test]
    fn abelian_chain_disentangles_without_class_rounds() {
        let g = GroupTable::cyclic(4);
        for seed in 0..4 {
            let trace = run_spt_protocol(&spt_cfg(g.clone(), None, 3, seed)).unwrap();
            assert!(trace.success, "{:?}", trace.failure);
            assert!(trace.rounds.is_empty());
            assert_eq!(trace.cumulative_depth, 0);
            assert_abs_diff_eq!(trace.fidelity.unwrap(), 1.0, epsilon = 1e-10);
            assert_eq!(trace.final_blocks.len(), 3);
        }
    }

    #[test]
    fn dihedral_chain_reaches_unit_fidelity() {
        let g = GroupTable::dihedral(8);
        let cocycle = Cocycle::dihedral_nontrivial(&g).unwrap();
        for seed in 0..6 {
            let trace =
                run_spt_protocol(&spt_cfg(g.clone(), Some(cocycle.clone()), 2, seed)).unwrap();
            assert!(trace.success, "seed {}: {:?}", seed, trace.failure);
            assert_abs_diff_eq!(trace.fidelity.unwrap(), 1.0, epsilon = 1e-9);
            assert_eq!(trace.rounds.len(), 1);
            let round = &trace.rounds[0];
            assert!(round.completion_defect.abs() < 1e-9);
            // Two class outcomes on a ring multiply to the identity.
            let entries = &round.outcomes.entries;
            assert_eq!(entries.len(), 2);
            assert_eq!((entries[0] + entries[1]) % 2, 0);
        }
    }

    #[test]
    fn dihedral_three_sites_compacts_and_succeeds() {
        let g = GroupTable::dihedral(8);
        let cocycle = Cocycle::dihedral_nontrivial(&g).unwrap();
        let mut seen_merge = false;
        for seed in 0..10 {
            let trace =
                run_spt_protocol(&spt_cfg(g.clone(), Some(cocycle.clone()), 3, seed)).unwrap();
            assert!(trace.success, "seed {}: {:?}", seed, trace.failure);
            assert_abs_diff_eq!(trace.fidelity.unwrap(), 1.0, epsilon = 1e-9);
            let round = &trace.rounds[0];
            assert!(round.max_block_sites <= 2);
            assert!(round.swap_depth <= 4 * round.threshold);
            if round.max_block_sites == 2 {
                seen_merge = true;
            }
        }
        assert!(seen_merge, "ten seeds never produced a non-identity outcome");
    }

    #[test]
    fn untwisted_dihedral_chain_also_disentangles() {
        let g = GroupTable::dihedral(8);
        let trace = run_spt_protocol(&spt_cfg(g, None, 2, 7)).unwrap();
        assert!(trace.success, "{:?}", trace.failure);
        assert_abs_diff_eq!(trace.fidelity.unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn forced_threshold_failure_is_reported() {
        let g = GroupTable::dihedral(8);
        let cocycle = Cocycle::dihedral_nontrivial(&g).unwrap();
        let mut cfg = spt_cfg(g, Some(cocycle), 3, 0);
        cfg.l_override = Some(vec![1]);
        cfg.backend = Backend::Dense;
        let mut failures = 0;
        for seed in 0..12 {
            cfg.seed = seed;
            let trace = run_spt_protocol(&cfg).unwrap();
            if !trace.success {
                assert!(trace.failure.is_some());
                assert!(trace.fidelity.is_none());
                failures += 1;
            }
        }
        // With L = 1 any trajectory containing a non-identity outcome
        // fails, which at three sites happens in three quarters of runs.
        assert!(failures > 0);
    }
}
