//! JSON file formats for instances, clusterings, X3C inputs and certificates.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Instance, Point};

/// `{"dim": .., "points": [[..], ..], "weights": [..]}`; `weights` is omitted
/// for unit-weight instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        Self {
            dim: inst.dim(),
            points: inst.points().iter().map(|p| p.coords().to_vec()).collect(),
            weights: (!inst.is_unweighted()).then(|| inst.weights().to_vec()),
        }
    }
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        if let Some(bad) = file.points.iter().find(|p| p.len() != file.dim) {
            return Err(Error::DimensionMismatch { expected: file.dim, got: bad.len() });
        }
        let points: Vec<Point> = file.points.into_iter().map(Point::new).collect();
        match file.weights {
            Some(w) => Instance::with_weights(points, w),
            None => Instance::new(points),
        }
    }
}

pub fn read_json<T: DeserializeOwned, R: Read>(input: R) -> Result<T> {
    Ok(serde_json::from_reader(input)?)
}

pub fn write_json<T: Serialize + ?Sized, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    read_json(BufReader::new(File::open(path)?))
}

pub fn save_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_json(value, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn instance_from_json(text: &str) -> Result<Instance> {
    serde_json::from_str::<InstanceFile>(text)?.try_into()
}

pub fn instance_to_json(inst: &Instance) -> Result<String> {
    Ok(serde_json::to_string(&InstanceFile::from(inst))?)
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    load_json::<InstanceFile>(path)?.try_into()
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    save_json(&InstanceFile::from(inst), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Clustering;
    use crate::hardness::{make_x3c, X3cInstance};

    #[test]
    fn instance_round_trip() {
        let inst = Instance::from_rows(vec![vec![0.1, 2.0], vec![-3.5, 1e-7]]).unwrap();
        let text = instance_to_json(&inst).unwrap();
        assert_eq!(text, r#"{"dim":2,"points":[[0.1,2.0],[-3.5,1e-7]]}"#);
        assert_eq!(instance_from_json(&text).unwrap(), inst);
    }

    #[test]
    fn weighted_round_trip() {
        let inst = Instance::with_weights(vec![Point::new(vec![1.0])], vec![10.0]).unwrap();
        let text = instance_to_json(&inst).unwrap();
        assert!(text.contains(r#""weights":[10.0]"#));
        assert_eq!(instance_from_json(&text).unwrap(), inst);
    }

    #[test]
    fn rejects_ragged_points() {
        assert!(instance_from_json(r#"{"dim":2,"points":[[1.0,2.0],[3.0]]}"#).is_err());
    }

    #[test]
    fn clustering_format() {
        let c: Clustering = serde_json::from_str(r#"{"k":2,"labels":[0,1,1]}"#).unwrap();
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"k":2,"labels":[0,1,1]}"#);
        assert!(serde_json::from_str::<Clustering>(r#"{"k":3,"labels":[0,1,1]}"#).is_err());
    }

    #[test]
    fn x3c_format() {
        let x: X3cInstance = serde_json::from_str(r#"{"m":1,"sets":[[3,1,2]]}"#).unwrap();
        assert_eq!(x, make_x3c(1, vec![vec![1, 2, 3]]).unwrap());
        assert_eq!(serde_json::to_string(&x).unwrap(), r#"{"m":1,"sets":[[1,2,3]]}"#);
        assert!(serde_json::from_str::<X3cInstance>(r#"{"m":1,"sets":[[1,2,7]]}"#).is_err());
    }
}
