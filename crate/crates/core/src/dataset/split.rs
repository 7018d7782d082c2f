use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, LinkSample, PathSample, Role};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Links and paths are shuffled and cut independently. Each side also
    /// carries [`Role::Context`] copies of the links its paths cross.
    Iid,
    /// Whole topologies move together; the smallest topologies go to train
    /// and the larger ones to test.
    BySize,
}

/// Partition `dataset` into `(train, test)` with the given fractions.
pub fn split(
    dataset: &Dataset,
    fractions: (f64, f64),
    mode: SplitMode,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (train_f, test_f) = fractions;
    let valid = |f: f64| f > 0.0 && f < 1.0;
    if !valid(train_f) || !valid(test_f) || (train_f + test_f - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split fractions must lie in (0, 1) and sum to 1, got ({train_f}, {test_f})"
        )));
    }
    let samples: Vec<&LinkSample> = dataset.samples().collect();
    if samples.len() < 2 {
        return Err(Error::invalid("need at least two link samples to split"));
    }
    match mode {
        SplitMode::Iid => split_iid(dataset, &samples, train_f, seed),
        SplitMode::BySize => split_by_size(dataset, &samples, train_f),
    }
}

fn shuffled_cut(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let cut = ((n as f64) * fraction).round() as usize;
    let mut first = order[..cut].to_vec();
    let mut second = order[cut..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    (first, second)
}

fn split_iid(
    dataset: &Dataset,
    samples: &[&LinkSample],
    train_f: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let mut link_rng = ChaCha8Rng::seed_from_u64(seed);
    link_rng.set_stream(0);
    let mut path_rng = ChaCha8Rng::seed_from_u64(seed);
    path_rng.set_stream(1);

    let (train_links, test_links) = shuffled_cut(samples.len(), train_f, &mut link_rng);
    let (train_paths, test_paths) = shuffled_cut(dataset.paths.len(), train_f, &mut path_rng);
    if train_links.is_empty() || test_links.is_empty() {
        return Err(Error::invalid("split fractions leave one side without links"));
    }

    let all: HashMap<&str, &LinkSample> = dataset.link_index();
    let build = |links: &[usize], paths: &[usize]| -> Dataset {
        let mut out: Vec<LinkSample> = links.iter().map(|&i| samples[i].clone()).collect();
        let own: HashSet<&str> = links.iter().map(|&i| samples[i].link_id.as_str()).collect();
        let paths: Vec<PathSample> = paths.iter().map(|&i| dataset.paths[i].clone()).collect();
        let mut context = HashSet::new();
        for path in &paths {
            for id in &path.link_ids {
                if !own.contains(id.as_str()) && context.insert(id.as_str()) {
                    if let Some(link) = all.get(id.as_str()) {
                        out.push(LinkSample {
                            role: Role::Context,
                            ..(*link).clone()
                        });
                    }
                }
            }
        }
        Dataset {
            links: out,
            paths,
            meta: dataset.meta.clone(),
        }
    };
    Ok((
        build(&train_links, &train_paths),
        build(&test_links, &test_paths),
    ))
}

fn split_by_size(
    dataset: &Dataset,
    samples: &[&LinkSample],
    train_f: f64,
) -> Result<(Dataset, Dataset)> {
    let mut by_size: BTreeMap<u32, usize> = BTreeMap::new();
    for link in samples {
        *by_size.entry(link.topology_size).or_default() += 1;
    }
    if by_size.len() < 2 {
        return Err(Error::invalid("by-size split needs at least two topology sizes"));
    }
    // whole size classes go to train, ascending, while the train share stays within budget
    let total = samples.len() as f64;
    let mut cumulative = 0usize;
    let mut largest_train_size = *by_size.keys().next().expect("nonempty");
    for (&size, &count) in &by_size {
        if (cumulative + count) as f64 / total > train_f + 1e-12 && cumulative > 0 {
            break;
        }
        cumulative += count;
        largest_train_size = size;
    }
    if cumulative == samples.len() {
        return Err(Error::invalid("by-size split leaves the test side empty"));
    }
    let topology_size: HashMap<&str, u32> = dataset
        .links
        .iter()
        .map(|l| (l.topology_id.as_str(), l.topology_size))
        .collect();
    let is_train = |size: u32| size <= largest_train_size;

    let mut train = Dataset {
        links: Vec::new(),
        paths: Vec::new(),
        meta: dataset.meta.clone(),
    };
    let mut test = train.clone();
    for link in &dataset.links {
        let side = if is_train(link.topology_size) { &mut train } else { &mut test };
        side.links.push(link.clone());
    }
    for path in &dataset.paths {
        let size = topology_size.get(path.topology_id.as_str()).copied().unwrap_or(0);
        let side = if is_train(size) { &mut train } else { &mut test };
        side.paths.push(path.clone());
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::super::{DatasetMeta, Source};
    use super::*;
    use proptest::prelude::*;

    fn dataset(sizes: &[(u32, usize)]) -> Dataset {
        let mut links = Vec::new();
        let mut paths = Vec::new();
        for (t, &(size, count)) in sizes.iter().enumerate() {
            for j in 0..count {
                links.push(LinkSample {
                    link_id: format!("t{t}-l{j}"),
                    topology_id: format!("t{t}"),
                    topology_size: size,
                    role: Role::Sample,
                    lambda: 0.5,
                    mu: Some(1.0),
                    k: 8,
                    capacity: None,
                    avg_packet_size: None,
                    observed_occupancy: 0.9 + j as f64 * 1e-3,
                    observed_delay: None,
                    observed_loss: None,
                });
            }
            paths.push(PathSample {
                flow_id: format!("t{t}-f0"),
                topology_id: format!("t{t}"),
                link_ids: vec![format!("t{t}-l0")],
                observed_end_to_end_delay: 1.0,
            });
        }
        Dataset {
            links,
            paths,
            meta: DatasetMeta::new(Source::Simulated, Some(1)),
        }
    }

    #[test]
    fn iid_sizes_and_determinism() {
        let d = dataset(&[(1, 100)]);
        let (train, test) = split(&d, (0.8, 0.2), SplitMode::Iid, 9).unwrap();
        assert_eq!(train.samples().count(), 80);
        assert_eq!(test.samples().count(), 20);
        assert_eq!(split(&d, (0.8, 0.2), SplitMode::Iid, 9).unwrap(), (train.clone(), test));
        assert_ne!(split(&d, (0.8, 0.2), SplitMode::Iid, 10).unwrap().0, train);
    }

    #[test]
    fn by_size_puts_large_topologies_in_test() {
        let d = dataset(&[(2, 20), (10, 10), (2, 20), (30, 10), (2, 20), (30, 10)]);
        let (train, test) = split(&d, (0.8, 0.2), SplitMode::BySize, 0).unwrap();
        assert!(test.links.iter().all(|l| l.topology_size == 30));
        assert!(train.links.iter().all(|l| l.topology_size <= 10));
        assert_eq!(test.links.len(), 20);
        train.validate().unwrap();
        test.validate().unwrap();
    }

    #[test]
    fn bad_fractions() {
        let d = dataset(&[(1, 10)]);
        assert!(split(&d, (0.5, 0.6), SplitMode::Iid, 0).is_err());
        assert!(split(&d, (1.0, 0.0), SplitMode::Iid, 0).is_err());
    }

    proptest! {
        #[test]
        fn iid_is_a_partition(n in 2usize..200, f in 0.05f64..0.95, seed in any::<u64>()) {
            let d = dataset(&[(3, n)]);
            prop_assume!(((n as f64) * f).round() as usize >= 1);
            prop_assume!((((n as f64) * f).round() as usize) < n);
            let (train, test) = split(&d, (f, 1.0 - f), SplitMode::Iid, seed).unwrap();
            let a: HashSet<_> = train.samples().map(|l| l.link_id.clone()).collect();
            let b: HashSet<_> = test.samples().map(|l| l.link_id.clone()).collect();
            prop_assert!(a.is_disjoint(&b));
            prop_assert_eq!(a.len() + b.len(), n);
            prop_assert_eq!(train.paths.len() + test.paths.len(), d.paths.len());
            train.validate().unwrap();
            test.validate().unwrap();
        }
    }
}
