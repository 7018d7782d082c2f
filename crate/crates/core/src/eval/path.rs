use std::collections::HashMap;

use crate::dataset::{Dataset, LinkSample, PathSample};
use crate::error::{Error, Result};
use crate::estimators::OccupancyModel;
use crate::queue::{featurize, occupancy_to_delay};

fn link_delay(model: &OccupancyModel, link: &LinkSample) -> Result<f64> {
    let missing = |field: &str| Error::invalid(format!("link {:?} has no {field}", link.link_id));
    let capacity = link.capacity.ok_or_else(|| missing("capacity"))?;
    let size = link.avg_packet_size.ok_or_else(|| missing("avg_packet_size"))?;
    let occupancy = model.predict(&featurize(&link.traffic())?)?;
    // a fitted curve can dip below zero at very low load; no queue holds negative packets
    occupancy_to_delay(occupancy.max(0.0), size, capacity)
}

/// Predicted delay of every link of `dataset`, keyed by link id.
pub fn link_delays<'a>(model: &OccupancyModel, dataset: &'a Dataset) -> Result<HashMap<&'a str, f64>> {
    dataset
        .links
        .iter()
        .map(|l| Ok((l.link_id.as_str(), link_delay(model, l)?)))
        .collect()
}

/// Sum of predicted link delays along `flow`.
pub fn predict_path_delay(model: &OccupancyModel, dataset: &Dataset, flow: &PathSample) -> Result<f64> {
    let index = dataset.link_index();
    flow.link_ids
        .iter()
        .map(|id| {
            let link = index
                .get(id.as_str())
                .ok_or_else(|| Error::Integrity(format!("flow {:?} references unknown link {id:?}", flow.flow_id)))?;
            link_delay(model, link)
        })
        .sum()
}

/// [`predict_path_delay`] for every flow of `dataset`, predicting each link once.
pub fn predict_path_delays(model: &OccupancyModel, dataset: &Dataset) -> Result<Vec<f64>> {
    let index = dataset.link_index();
    let mut cache: HashMap<&str, f64> = HashMap::new();
    dataset
        .paths
        .iter()
        .map(|flow| {
            flow.link_ids
                .iter()
                .map(|id| {
                    if let Some(d) = cache.get(id.as_str()) {
                        return Ok(*d);
                    }
                    let link = index.get(id.as_str()).ok_or_else(|| {
                        Error::Integrity(format!("flow {:?} references unknown link {id:?}", flow.flow_id))
                    })?;
                    let d = link_delay(model, link)?;
                    cache.insert(link.link_id.as_str(), d);
                    Ok(d)
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetMeta, Role, Source};
    use crate::estimators::ExpPolyModel;

    fn link(id: &str) -> LinkSample {
        LinkSample {
            link_id: id.into(),
            topology_id: "t".into(),
            topology_size: 2,
            role: Role::Sample,
            lambda: 500.0,
            mu: None,
            k: 32,
            capacity: Some(1e6),
            avg_packet_size: Some(1000.0),
            observed_occupancy: 1.0,
            observed_delay: None,
            observed_loss: None,
        }
    }

    fn model() -> OccupancyModel {
        OccupancyModel::ExpPoly(ExpPolyModel {
            degree: 1,
            coefficients: vec![0.0, 2.0],
        })
    }

    fn dataset(paths: Vec<Vec<&str>>) -> Dataset {
        Dataset {
            links: vec![link("a"), link("b")],
            paths: paths
                .into_iter()
                .enumerate()
                .map(|(i, p)| PathSample {
                    flow_id: format!("f{i}"),
                    topology_id: "t".into(),
                    link_ids: p.into_iter().map(String::from).collect(),
                    observed_end_to_end_delay: 1.0,
                })
                .collect(),
            meta: DatasetMeta::new(Source::Simulated, None),
        }
    }

    #[test]
    fn one_link_and_additivity() {
        let d = dataset(vec![vec!["a"], vec!["a", "b"]]);
        let m = model();
        let single = predict_path_delay(&m, &d, &d.paths[0]).unwrap();
        let f = featurize(&d.links[0].traffic()).unwrap();
        let expected = occupancy_to_delay(m.predict(&f).unwrap(), 1000.0, 1e6).unwrap();
        assert_eq!(single, expected);
        assert_eq!(predict_path_delay(&m, &d, &d.paths[1]).unwrap(), 2.0 * single);
        assert_eq!(predict_path_delays(&m, &d).unwrap(), vec![single, 2.0 * single]);
    }

    #[test]
    fn missing_metadata() {
        let mut d = dataset(vec![vec!["a"]]);
        d.links[0].avg_packet_size = None;
        d.links[0].mu = Some(500.0);
        let err = predict_path_delay(&model(), &d, &d.paths[0]).unwrap_err();
        assert!(err.to_string().contains("avg_packet_size"));
    }
}
