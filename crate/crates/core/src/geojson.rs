//! Minimal feature-collection document used for prescriptions and
//! as-applied maps: one polygon ring per feature, planar meter coordinates.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Rect;

pub const PLANAR_CRS: &str = "local:planar-meters";

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct Collection<H, P> {
    #[serde(rename = "type")]
    pub kind: String,
    pub crs: Crs,
    /// Document header (foreign member).
    pub rowcrop: H,
    pub features: Vec<Feature<P>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct Crs {
    #[serde(rename = "type")]
    pub kind: String,
    pub properties: CrsName,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CrsName {
    pub name: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct Feature<P> {
    #[serde(rename = "type")]
    pub kind: String,
    pub geometry: Geometry,
    pub properties: P,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct Geometry {
    #[serde(rename = "type")]
    pub kind: String,
    pub coordinates: Vec<Vec<[f64; 2]>>,
}

impl<H, P> Collection<H, P> {
    pub fn new(header: H, features: Vec<Feature<P>>) -> Self {
        Collection {
            kind: "FeatureCollection".into(),
            crs: Crs {
                kind: "name".into(),
                properties: CrsName {
                    name: PLANAR_CRS.into(),
                },
            },
            rowcrop: header,
            features,
        }
    }
}

impl<P> Feature<P> {
    pub fn rectangle(rect: &Rect, properties: P) -> Self {
        Feature {
            kind: "Feature".into(),
            geometry: Geometry {
                kind: "Polygon".into(),
                coordinates: vec![rect.ring().to_vec()],
            },
            properties,
        }
    }

    /// The feature's rectangle, or a message describing why it is not one.
    pub fn rect(&self) -> std::result::Result<Rect, String> {
        if self.kind != "Feature" {
            return Err(format!("expected type Feature, found {:?}", self.kind));
        }
        if self.geometry.kind != "Polygon" {
            return Err(format!("expected Polygon geometry, found {:?}", self.geometry.kind));
        }
        match self.geometry.coordinates.as_slice() {
            [ring] => Rect::from_ring(ring),
            rings => Err(format!("expected one ring, found {}", rings.len())),
        }
    }
}

pub(crate) fn write<H: Serialize, P: Serialize>(path: &Path, doc: &Collection<H, P>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, doc).map_err(|e| Error::parse(path.display().to_string(), e))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read<H: DeserializeOwned, P: DeserializeOwned>(path: &Path) -> Result<Collection<H, P>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let doc: Collection<H, P> = serde_json::from_reader(BufReader::new(file)).map_err(|e| {
        Error::parse(
            format!("{} (line {}, column {})", path.display(), e.line(), e.column()),
            e,
        )
    })?;
    if doc.kind != "FeatureCollection" {
        return Err(Error::parse(
            path.display().to_string(),
            format!("expected a FeatureCollection, found {:?}", doc.kind),
        ));
    }
    Ok(doc)
}

pub(crate) fn feature_error(path: &Path, index: usize, message: impl ToString) -> Error {
    Error::parse(format!("{} (feature {index})", path.display()), message)
}
