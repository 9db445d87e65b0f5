//! Districts, contiguity and the block-model edge probabilities.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_fraction, check_positive, invalid, Error, Result};

const BUNDLED: &str = include_str!("../../data/west_africa.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Country {
    GN,
    LB,
    SL,
}

impl Country {
    pub const ALL: [Country; 3] = [Country::GN, Country::LB, Country::SL];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Country::GN => "Guinea",
            Country::LB => "Liberia",
            Country::SL => "Sierra Leone",
        }
    }
}

impl fmt::Display for Country {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct District {
    pub id: String,
    pub country: Country,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeographyFile", into = "GeographyFile")]
pub struct Geography {
    districts: Vec<District>,
    contiguity: Vec<(usize, usize)>,
    contiguous: HashSet<(usize, usize)>,
    total_nodes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GeographyFile {
    districts: Vec<District>,
    contiguity: Vec<(String, String)>,
    #[serde(default = "default_total_nodes")]
    total_nodes: usize,
}

fn default_total_nodes() -> usize {
    8000
}

impl TryFrom<GeographyFile> for Geography {
    type Error = Error;

    fn try_from(file: GeographyFile) -> Result<Self> {
        let index: HashMap<&str, usize> = file
            .districts
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.as_str(), i))
            .collect();
        if index.len() != file.districts.len() {
            return Err(invalid("districts", "duplicate district id"));
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::UnknownDistrict(id.to_string()))
        };
        let mut contiguity = Vec::with_capacity(file.contiguity.len());
        for (a, b) in &file.contiguity {
            let (a, b) = (lookup(a)?, lookup(b)?);
            if a == b {
                return Err(invalid("contiguity", format!("district {a} listed next to itself")));
            }
            contiguity.push((a.min(b), a.max(b)));
        }
        Geography::new(file.districts, contiguity, file.total_nodes)
    }
}

impl From<Geography> for GeographyFile {
    fn from(g: Geography) -> Self {
        let contiguity = g
            .contiguity
            .iter()
            .map(|&(a, b)| (g.districts[a].id.clone(), g.districts[b].id.clone()))
            .collect();
        GeographyFile {
            districts: g.districts,
            contiguity,
            total_nodes: g.total_nodes,
        }
    }
}

impl Geography {
    /// `contiguity` holds district index pairs.
    pub fn new(districts: Vec<District>, contiguity: Vec<(usize, usize)>, total_nodes: usize) -> Result<Self> {
        if districts.is_empty() {
            return Err(Error::EmptyInput("districts"));
        }
        for d in &districts {
            check_positive("weight", d.weight)?;
        }
        let mut contiguous = HashSet::new();
        for &(a, b) in &contiguity {
            if a >= districts.len() || b >= districts.len() || a == b {
                return Err(invalid("contiguity", format!("bad pair ({a}, {b})")));
            }
            contiguous.insert((a.min(b), a.max(b)));
        }
        Ok(Self {
            districts,
            contiguity,
            contiguous,
            total_nodes,
        })
    }

    /// The bundled 55-district West African geography.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled geography is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GeographyFile = serde_json::from_str(text)?;
        Self::try_from(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn districts(&self) -> &[District] {
        &self.districts
    }

    pub fn contiguity(&self) -> &[(usize, usize)] {
        &self.contiguity
    }

    pub fn total_nodes(&self) -> usize {
        self.total_nodes
    }

    pub fn with_total_nodes(mut self, total_nodes: usize) -> Self {
        self.total_nodes = total_nodes;
        self
    }

    pub fn district_index(&self, id: &str) -> Result<usize> {
        self.districts
            .iter()
            .position(|d| d.id == id)
            .ok_or_else(|| Error::UnknownDistrict(id.to_string()))
    }

    pub fn are_contiguous(&self, a: usize, b: usize) -> bool {
        self.contiguous.contains(&(a.min(b), a.max(b)))
    }

    /// Nodes per district, proportional to weight, rounded by largest
    /// remainder so the counts sum to `total_nodes`. Remainder ties go to
    /// the lower district index.
    pub fn node_allocation(&self) -> Vec<usize> {
        let total: f64 = self.districts.iter().map(|d| d.weight).sum();
        let quotas: Vec<f64> = self
            .districts
            .iter()
            .map(|d| self.total_nodes as f64 * d.weight / total)
            .collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (quotas[a] - counts[a] as f64, quotas[b] - counts[b] as f64);
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().take(self.total_nodes.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        counts
    }
}

/// Edge probabilities of the stochastic block model by district relation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmProbabilities {
    pub within: f64,
    pub guinea: f64,
    pub liberia: f64,
    pub sierra_leone: f64,
    pub cross_country: f64,
}

impl Default for SbmProbabilities {
    fn default() -> Self {
        Self {
            within: 1e-2,
            guinea: 2.15e-3,
            liberia: 3e-3,
            sierra_leone: 3.15e-3,
            cross_country: 1.9e-3,
        }
    }
}

impl SbmProbabilities {
    pub fn validate(&self) -> Result<()> {
        check_fraction("within", self.within)?;
        check_fraction("guinea", self.guinea)?;
        check_fraction("liberia", self.liberia)?;
        check_fraction("sierra_leone", self.sierra_leone)?;
        check_fraction("cross_country", self.cross_country)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn between(&self, country: Country) -> f64 {
        match country {
            Country::GN => self.guinea,
            Country::LB => self.liberia,
            Country::SL => self.sierra_leone,
        }
    }

    /// Edge probability between nodes of districts `a` and `b`.
    /// Non-contiguous pairs of distinct districts are never linked.
    pub fn pair(&self, geography: &Geography, a: usize, b: usize) -> f64 {
        if a == b {
            return self.within;
        }
        if !geography.are_contiguous(a, b) {
            return 0.0;
        }
        let (ca, cb) = (geography.districts[a].country, geography.districts[b].country);
        if ca == cb {
            self.between(ca)
        } else {
            self.cross_country
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_geography_shape() {
        let g = Geography::bundled();
        assert_eq!(g.districts().len(), 55);
        assert_eq!(g.total_nodes(), 8000);
        let alloc = g.node_allocation();
        assert_eq!(alloc.iter().sum::<usize>(), 8000);
        for c in Country::ALL {
            assert!(g.districts().iter().any(|d| d.country == c));
        }
        let back = Geography::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn largest_remainder() {
        let d = |id: &str, w| District {
            id: id.into(),
            country: Country::GN,
            weight: w,
        };
        let g = Geography::new(vec![d("a", 1.0), d("b", 1.0), d("c", 1.0)], vec![], 10).unwrap();
        assert_eq!(g.node_allocation(), vec![4, 3, 3]);
    }

    #[test]
    fn unknown_district_in_contiguity() {
        let text = r#"{"districts":[{"id":"a","country":"GN","weight":1}],
                       "contiguity":[["a","zz"]],"total_nodes":5}"#;
        assert!(matches!(Geography::from_json(text), Err(Error::UnknownDistrict(_))));
    }

    #[test]
    fn pair_probabilities() {
        let g = Geography::bundled();
        let p = SbmProbabilities::default();
        let i = |id| g.district_index(id).unwrap();
        assert_eq!(p.pair(&g, i("Gueckedou"), i("Gueckedou")), 1e-2);
        assert_eq!(p.pair(&g, i("Gueckedou"), i("Macenta")), 2.15e-3);
        assert_eq!(p.pair(&g, i("Gueckedou"), i("Kailahun")), 1.9e-3);
        assert_eq!(p.pair(&g, i("Kenema"), i("Bo")), 3.15e-3);
        assert_eq!(p.pair(&g, i("Bong"), i("Lofa")), 3e-3);
        assert_eq!(p.pair(&g, i("Conakry"), i("Maryland")), 0.0);
    }
}
