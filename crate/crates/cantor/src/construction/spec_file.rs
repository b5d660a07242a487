use serde::{Deserialize, Serialize};

use super::alpha::{AlphaSeq, SeqSpec};
use super::explicit::{Explicit, ExplicitNode};
use super::middle::middle_interval;
use super::node::Construction;
use super::ConstructionError;

/// File form of a construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstructionSpec {
    MiddleInterval {
        sequence: SeqSpec,
    },
    Explicit {
        levels: Vec<Vec<ExplicitNode>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        declared: Option<SeqSpec>,
    },
}

/// A construction with the sequence it is checked against.
pub struct Built {
    pub construction: Construction,
    pub declared: Option<AlphaSeq>,
}

impl ConstructionSpec {
    pub fn build(&self) -> Result<Built, ConstructionError> {
        match self {
            ConstructionSpec::MiddleInterval { sequence } => {
                let seq = sequence.build()?;
                let (c, _) = middle_interval(seq.clone())?;
                Ok(Built { construction: c, declared: Some(seq) })
            }
            ConstructionSpec::Explicit { levels, declared } => Ok(Built {
                construction: Explicit::construction(levels.clone())?,
                declared: declared.as_ref().map(|d| d.build()).transpose()?,
            }),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConstructionError> {
        serde_json::from_str(text).map_err(|e| ConstructionError::Parse(e.to_string()))
    }
}

/// Lists levels `1..=depth` of any construction as an explicit spec.
pub fn materialize(c: &Construction, depth: u32, declared: Option<&AlphaSeq>) -> Result<ConstructionSpec, ConstructionError> {
    let levels = c
        .levels(depth)?
        .into_iter()
        .map(|lv| {
            lv.iter()
                .map(|n| Ok(ExplicitNode { interval: (n.lo.clone(), n.hi.clone()), gap: c.gap(n)? }))
                .collect::<Result<Vec<_>, ConstructionError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConstructionSpec::Explicit { levels, declared: declared.and_then(|d| d.to_spec()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::checks::check_nice;
    use crate::numerics::rat;

    #[test]
    fn parse_middle_thirds() {
        let s = ConstructionSpec::from_json(r#"{"kind":"middle_interval","sequence":{"formula":"constant","r":"1/3"}}"#).unwrap();
        let b = s.build().unwrap();
        assert_eq!(check_nice(&b.construction, 4).unwrap().lower_rat(), rat(0, 1));
    }

    #[test]
    fn explicit_roundtrip_and_leaves() {
        let s = ConstructionSpec::from_json(
            r#"{"kind":"explicit","levels":[[{"interval":["0","1"],"gap":["1/3","2/3"]}]]}"#,
        )
        .unwrap();
        let b = s.build().unwrap();
        let lv = b.construction.levels(3).unwrap();
        assert_eq!(lv.len(), 2);
        assert_eq!(lv[1].len(), 2);
        let again = materialize(&b.construction, 1, None).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn malformed_spec_is_parse_error() {
        assert!(matches!(
            ConstructionSpec::from_json(r#"{"kind":"middle_interval","sequence":{"formula":"constant","r":"1/0"}}"#),
            Err(ConstructionError::Parse(_))
        ));
    }
}
