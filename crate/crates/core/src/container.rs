//! On-disk dataset container.
//!
//! ```text
//! <root>/manifest.json        format version, grids, provenance, sample index
//! <root>/blobs/000000.ferd    one feature blob per sample
//! <root>/paths/000000.json    frozen propagation paths (absent for imports)
//! ```
//!
//! A blob is the 4-byte magic `FERD`, one version byte (1), then
//! `2 * snapshots * bins` little-endian `f32` values ordered plane (real, imag),
//! then snapshot, then bin. The shape is taken from `feature_shape` in the
//! manifest; generated containers always use `[2, 200, 41]`, imported
//! measurements may carry wideband grids that are cut down on read.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{CtfGrid, GridSpec, StationaryProcess};
use crate::dataset::{
    resample_ctf, to_feature_block, FeatureBlock, FerClassScheme, FEATURE_BINS, FEATURE_SNAPSHOTS,
};
use crate::error::{Error, Result};
use crate::source::SampleSource;

pub const FORMAT_VERSION: u32 = 1;
pub const BLOB_MAGIC: [u8; 4] = *b"FERD";
pub const BLOB_VERSION: u8 = 1;
pub const FLATTEN_ORDER: &str = "plane,time,frequency";
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FerLabel {
    pub frames_sent: u64,
    pub frames_failed: u64,
    pub fer: f64,
    pub class_label: u8,
    /// Some path delay exceeded the cyclic prefix; ISI was neglected.
    pub cp_exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub index: usize,
    pub region_id: String,
    pub source: SampleSource,
    pub seed: u64,
    pub blob: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<FerLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    /// Grid the regions were defined on.
    pub grid: GridSpec,
    /// `[planes, snapshots, bins]` of every blob.
    pub feature_shape: [usize; 3],
    pub flatten_order: String,
    pub master_seed: u64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phy_config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_scheme: Option<FerClassScheme>,
    pub samples: Vec<SampleEntry>,
}

impl Manifest {
    pub fn new(grid: GridSpec, master_seed: u64, config_hash: String) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            grid,
            feature_shape: [2, FEATURE_SNAPSHOTS, FEATURE_BINS],
            flatten_order: FLATTEN_ORDER.to_string(),
            master_seed,
            config_hash,
            phy_config_hash: None,
            class_scheme: None,
            samples: Vec::new(),
        }
    }

    pub fn blob_len(&self) -> usize {
        self.feature_shape.iter().product()
    }
}

pub fn encode_blob(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(5 + 4 * values.len());
    out.extend_from_slice(&BLOB_MAGIC);
    out.push(BLOB_VERSION);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_blob(bytes: &[u8], expected_len: usize) -> std::result::Result<Vec<f32>, String> {
    if bytes.len() < 5 || bytes[..4] != BLOB_MAGIC {
        return Err("missing FERD magic".into());
    }
    if bytes[4] != BLOB_VERSION {
        return Err(format!("unsupported blob version {}", bytes[4]));
    }
    let body = &bytes[5..];
    if body.len() != 4 * expected_len {
        return Err(format!("expected {} floats, found {} bytes", expected_len, body.len()));
    }
    let values: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if !values.iter().all(|v| v.is_finite()) {
        return Err("non-finite value in blob".into());
    }
    Ok(values)
}

#[derive(Debug, Clone)]
pub struct DatasetContainer {
    root: PathBuf,
    pub manifest: Manifest,
}

impl DatasetContainer {
    /// Start a new container at `root` (created if missing).
    pub fn create(root: impl Into<PathBuf>, manifest: Manifest) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("blobs"))?;
        fs::create_dir_all(root.join("paths"))?;
        Ok(Self { root, manifest })
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let text = fs::read(root.join(MANIFEST)).map_err(|e| Error::Container {
            path: root.clone(),
            reason: format!("cannot read manifest: {e}"),
        })?;
        let manifest: Manifest = serde_json::from_slice(&text).map_err(|e| Error::Container {
            path: root.clone(),
            reason: format!("invalid manifest: {e}"),
        })?;
        let c = Self { root, manifest };
        c.validate()?;
        Ok(c)
    }

    fn bad(&self, reason: impl Into<String>) -> Error {
        Error::Container {
            path: self.root.clone(),
            reason: reason.into(),
        }
    }

    fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        if m.format_version != FORMAT_VERSION {
            return Err(self.bad(format!("unsupported format version {}", m.format_version)));
        }
        if m.flatten_order != FLATTEN_ORDER || m.feature_shape[0] != 2 {
            return Err(self.bad("unsupported feature layout"));
        }
        for (i, s) in m.samples.iter().enumerate() {
            if s.index != i {
                return Err(self.bad(format!("sample {i} has index {}", s.index)));
            }
            if !self.root.join(&s.blob).is_file() {
                return Err(self.bad(format!("missing blob {}", s.blob)));
            }
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.manifest.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.samples.is_empty()
    }

    pub fn blob_name(index: usize) -> String {
        format!("blobs/{index:06}.ferd")
    }

    pub fn paths_name(index: usize) -> String {
        format!("paths/{index:06}.json")
    }

    pub fn write_blob(&self, index: usize, values: &[f32]) -> Result<String> {
        let name = Self::blob_name(index);
        fs::write(self.root.join(&name), encode_blob(values))?;
        Ok(name)
    }

    pub fn write_process(&self, index: usize, process: &StationaryProcess) -> Result<String> {
        let name = Self::paths_name(index);
        fs::write(self.root.join(&name), serde_json::to_vec(process)?)?;
        Ok(name)
    }

    pub fn read_raw(&self, entry: &SampleEntry) -> Result<Vec<f32>> {
        let bytes = fs::read(self.root.join(&entry.blob))?;
        decode_blob(&bytes, self.manifest.blob_len())
            .map_err(|r| self.bad(format!("{}: {r}", entry.blob)))
    }

    /// Feature block of a sample, cutting wideband imports down to the 41 centre bins.
    pub fn read_features(&self, entry: &SampleEntry) -> Result<FeatureBlock> {
        let raw = self.read_raw(entry)?;
        let [_, snapshots, bins] = self.manifest.feature_shape;
        if snapshots != FEATURE_SNAPSHOTS {
            return Err(Error::Dimension {
                expected: format!("{FEATURE_SNAPSHOTS} snapshots"),
                actual: format!("{snapshots} snapshots"),
            });
        }
        if bins == FEATURE_BINS {
            return FeatureBlock::from_flat(raw);
        }
        let plane = snapshots * bins;
        let values = Array2::from_shape_fn((snapshots, bins), |(m, k)| {
            Complex64::new(raw[m * bins + k] as f64, raw[plane + m * bins + k] as f64)
        });
        let spec = GridSpec {
            num_subcarriers: bins,
            num_snapshots: snapshots,
            ..self.manifest.grid
        };
        to_feature_block(&resample_ctf(&CtfGrid { spec, first_snapshot: 0, values })?)
    }

    pub fn read_process(&self, entry: &SampleEntry) -> Result<StationaryProcess> {
        let name = entry
            .paths
            .as_ref()
            .ok_or_else(|| self.bad(format!("sample {} has no path parameters", entry.region_id)))?;
        let bytes = fs::read(self.root.join(name))?;
        serde_json::from_slice(&bytes).map_err(|e| self.bad(format!("{name}: {e}")))
    }

    pub fn manifest_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(&self.manifest)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn save_manifest(&self) -> Result<()> {
        fs::write(self.root.join(MANIFEST), self.manifest_bytes()?)?;
        Ok(())
    }

    /// Copy the container payload to `dest`, keeping this manifest in memory
    /// pointed at the new root.
    pub fn copy_to(&self, dest: impl Into<PathBuf>) -> Result<Self> {
        let dest = dest.into();
        if dest == self.root {
            return Ok(self.clone());
        }
        let copy = Self::create(dest, self.manifest.clone())?;
        for s in &self.manifest.samples {
            fs::copy(self.root.join(&s.blob), copy.root.join(&s.blob))?;
            if let Some(p) = &s.paths {
                fs::copy(self.root.join(p), copy.root.join(p))?;
            }
        }
        Ok(copy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FEATURE_LEN;
    use proptest::prelude::*;

    #[test]
    fn blob_header_layout() {
        let b = encode_blob(&[1.0, -2.5]);
        assert_eq!(&b[..5], b"FERD\x01");
        assert_eq!(&b[5..9], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 13);
        assert!(decode_blob(&b, 3).is_err());
        assert!(decode_blob(b"FERX\x01", 0).is_err());
        assert!(decode_blob(&encode_blob(&[f32::NAN]), 1).is_err());
    }

    proptest! {
        #[test]
        fn blob_roundtrip(v in prop::collection::vec(-1e6f32..1e6, 0..64)) {
            prop_assert_eq!(decode_blob(&encode_blob(&v), v.len()).unwrap(), v);
        }
    }

    #[test]
    fn container_write_read_write_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = DatasetContainer::create(dir.path(), Manifest::new(GridSpec::default(), 7, "abc".into())).unwrap();
        let values: Vec<f32> = (0..FEATURE_LEN).map(|i| i as f32 * 0.5).collect();
        let blob = c.write_blob(0, &values).unwrap();
        c.manifest.samples.push(SampleEntry {
            index: 0,
            region_id: "x".into(),
            source: SampleSource::Tdl,
            seed: 3,
            blob,
            paths: None,
            label: Some(FerLabel { frames_sent: 10, frames_failed: 1, fer: 0.1, class_label: 2, cp_exceeded: false }),
        });
        c.save_manifest().unwrap();
        let first = fs::read(dir.path().join(MANIFEST)).unwrap();
        let reopened = DatasetContainer::open(dir.path()).unwrap();
        assert_eq!(reopened.manifest, c.manifest);
        reopened.save_manifest().unwrap();
        assert_eq!(fs::read(dir.path().join(MANIFEST)).unwrap(), first);
        let fb = reopened.read_features(&reopened.manifest.samples[0]).unwrap();
        assert_eq!(fb.as_slice(), &values[..]);
    }

    #[test]
    fn wideband_import_is_cut_to_centre_bins() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new(GridSpec::default(), 0, String::new());
        m.feature_shape = [2, 200, 601];
        let mut c = DatasetContainer::create(dir.path(), m).unwrap();
        // real part = bin index, imaginary part = snapshot index
        let mut raw = vec![0f32; 2 * 200 * 601];
        for mm in 0..200 {
            for k in 0..601 {
                raw[mm * 601 + k] = k as f32 - 300.0;
                raw[200 * 601 + mm * 601 + k] = mm as f32;
            }
        }
        let blob = c.write_blob(0, &raw).unwrap();
        c.manifest.samples.push(SampleEntry {
            index: 0, region_id: "m0".into(), source: SampleSource::Measured, seed: 0, blob, paths: None, label: None,
        });
        let fb = c.read_features(&c.manifest.samples[0]).unwrap();
        assert_eq!(fb.get(0, 5, 0), -20.0);
        assert_eq!(fb.get(0, 5, 40), 20.0);
        assert_eq!(fb.get(1, 17, 3), 17.0);
    }

    #[test]
    fn missing_blob_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = DatasetContainer::create(dir.path(), Manifest::new(GridSpec::default(), 0, String::new())).unwrap();
        c.manifest.samples.push(SampleEntry {
            index: 0, region_id: "a".into(), source: SampleSource::Gscm, seed: 0,
            blob: DatasetContainer::blob_name(0), paths: None, label: None,
        });
        c.save_manifest().unwrap();
        assert!(matches!(DatasetContainer::open(dir.path()), Err(Error::Container { .. })));
    }
}
