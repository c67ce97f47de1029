use std::fs;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{load_bvst, save_bvst};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerManifest {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub layers: Vec<LayerManifest>,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

/// Write each named tensor as `<name>.bvst` plus a `manifest.json` index.
pub fn save_checkpoint(dir: &Path, tensors: &[(String, Vec<usize>, Vec<f64>, Option<f64>)], meta: serde_json::Map<String, serde_json::Value>) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut manifest = Manifest { layers: Vec::new(), meta };
    for (name, shape, data, lambda) in tensors {
        let file = format!("{name}.bvst");
        let arr = ArrayD::from_shape_vec(IxDyn(shape), data.iter().map(|&v| v as f32).collect())
            .map_err(|e| Error::Shape(format!("{name}: {e}")))?;
        save_bvst(&dir.join(&file), &arr)?;
        manifest.layers.push(LayerManifest { name: name.clone(), shape: shape.clone(), file, lambda: *lambda });
    }
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Read back every tensor listed in the manifest (values widened to f64).
pub fn load_checkpoint(dir: &Path) -> Result<(Manifest, Vec<(String, Vec<f64>)>)> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let mut out = Vec::with_capacity(manifest.layers.len());
    for layer in &manifest.layers {
        let arr = load_bvst(&dir.join(&layer.file))?;
        if arr.shape() != layer.shape.as_slice() {
            return Err(Error::Format { format: "checkpoint", reason: format!("{} has shape {:?}, manifest says {:?}", layer.name, arr.shape(), layer.shape) });
        }
        out.push((layer.name.clone(), arr.iter().map(|&v| v as f64).collect()));
    }
    Ok((manifest, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = vec![
            ("a.w".to_string(), vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5], Some(1.0)),
            ("a.b".to_string(), vec![2], vec![-1.0, 0.25], None),
        ];
        save_checkpoint(dir.path(), &t, Default::default()).unwrap();
        let (m, data) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(m.layers[0].shape, vec![2, 3]);
        assert_eq!(m.layers[0].lambda, Some(1.0));
        assert_eq!(data[0].1, t[0].2);
        assert_eq!(data[1].1, t[1].2);
    }
}
