//! Parsers for flag values naming chains, states, kernel targets, and
//! boundary cylinders.
//!
//! - chain: `regular_tree:3`, `drifted_line:0.75`, `lattice3d`
//! - state: `root`, tree word `0,1,0`, line coordinate `-3`, lattice `1,-2,0`
//! - target: `state:<state>`, tree `ray:0,1` (or `ray:root`), line
//!   `plus_infinity` / `minus_infinity`, lattice `infinity`
//! - cylinder: tree `shadow:0,1` (or `shadow:root`), line `plus` / `minus`,
//!   lattice `full`

use anyhow::{anyhow, bail, Result};

use brw_core::chains::{ChainKind, ChainModel, State};
use brw_core::potential::{BoundaryPoint, CompactificationPoint, CylinderSet, MartinTarget};

pub fn parse_chain(spec: &str) -> Result<ChainModel> {
    let (name, param) = match spec.split_once(':') {
        Some((name, param)) => (name, Some(param)),
        None => (spec, None),
    };
    let model = match (name, param) {
        ("regular_tree", Some(degree)) => ChainModel::regular_tree(
            degree
                .parse()
                .map_err(|_| anyhow!("regular_tree wants an integer degree, got `{degree}`"))?,
        )?,
        ("regular_tree", None) => bail!("regular_tree wants a degree, e.g. regular_tree:3"),
        ("drifted_line", Some(p)) => ChainModel::drifted_line(
            p.parse()
                .map_err(|_| anyhow!("drifted_line wants a probability, got `{p}`"))?,
        )?,
        ("drifted_line", None) => {
            bail!("drifted_line wants a right probability, e.g. drifted_line:0.75")
        }
        ("lattice3d", None) => ChainModel::lattice3d(),
        ("lattice3d", Some(_)) => bail!("lattice3d takes no parameter"),
        (other, _) => bail!("unknown chain `{other}` (regular_tree, drifted_line, lattice3d)"),
    };
    Ok(model)
}

fn parse_word(raw: &str) -> Result<Vec<u8>> {
    if raw == "root" || raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|letter| {
            letter
                .trim()
                .parse()
                .map_err(|_| anyhow!("tree words are comma-separated letters, got `{letter}`"))
        })
        .collect()
}

pub fn parse_state(chain: &ChainModel, raw: &str) -> Result<State> {
    if raw == "root" || raw == "origin" {
        return Ok(chain.origin());
    }
    let state = match chain.kind() {
        ChainKind::RegularTree { .. } => State::TreeWord(parse_word(raw)?),
        ChainKind::DriftedLine { .. } => State::LinePoint(
            raw.parse()
                .map_err(|_| anyhow!("line states are integers, got `{raw}`"))?,
        ),
        ChainKind::Lattice3D => {
            let coords: Vec<i64> = raw
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse()
                        .map_err(|_| anyhow!("lattice coordinates are integers, got `{c}`"))
                })
                .collect::<Result<_>>()?;
            let [x, y, z] = coords[..] else {
                bail!("lattice states are `x,y,z` triples, got `{raw}`");
            };
            State::LatticePoint([x, y, z])
        }
    };
    chain.validate_state(&state)?;
    Ok(state)
}

pub fn parse_target(chain: &ChainModel, raw: &str) -> Result<MartinTarget> {
    if let Some(interior) = raw.strip_prefix("state:") {
        return Ok(CompactificationPoint::Interior(parse_state(chain, interior)?));
    }
    let boundary = match (chain.kind(), raw) {
        (ChainKind::RegularTree { .. }, _) if raw.starts_with("ray:") => {
            BoundaryPoint::tree_ray(parse_word(&raw[4..])?)
        }
        (ChainKind::DriftedLine { .. }, "plus_infinity") => BoundaryPoint::PlusInfinity,
        (ChainKind::DriftedLine { .. }, "minus_infinity") => BoundaryPoint::MinusInfinity,
        (ChainKind::Lattice3D, "infinity") => BoundaryPoint::LatticeInfinity,
        _ => bail!(
            "unknown target `{raw}` for this chain (state:<state>, tree ray:<word>, \
             line plus_infinity/minus_infinity, lattice infinity)"
        ),
    };
    boundary.validate_for(chain)?;
    Ok(CompactificationPoint::Boundary(boundary))
}

pub fn parse_cylinder(chain: &ChainModel, raw: &str) -> Result<CylinderSet> {
    let set = match (chain.kind(), raw) {
        (ChainKind::RegularTree { .. }, _) if raw.starts_with("shadow:") => {
            CylinderSet::TreeShadow(parse_word(&raw[7..])?)
        }
        (ChainKind::DriftedLine { .. }, "plus") => CylinderSet::LinePlus,
        (ChainKind::DriftedLine { .. }, "minus") => CylinderSet::LineMinus,
        (ChainKind::Lattice3D, "full") => CylinderSet::LatticeFull,
        _ => bail!(
            "unknown cylinder `{raw}` for this chain (tree shadow:<word>, line plus/minus, \
             lattice full)"
        ),
    };
    set.validate_for(chain)?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_state_target_and_cylinder_specs_parse() {
        let tree = parse_chain("regular_tree:3").unwrap();
        assert_eq!(tree.kind(), ChainKind::RegularTree { degree: 3 });
        assert_eq!(parse_state(&tree, "root").unwrap(), State::TreeWord(vec![]));
        assert_eq!(
            parse_state(&tree, "0,1").unwrap(),
            State::TreeWord(vec![0, 1])
        );
        assert!(matches!(
            parse_target(&tree, "ray:0,1").unwrap(),
            CompactificationPoint::Boundary(BoundaryPoint::TreeRay(_))
        ));
        assert_eq!(
            parse_cylinder(&tree, "shadow:2").unwrap(),
            CylinderSet::TreeShadow(vec![2])
        );

        let line = parse_chain("drifted_line:0.75").unwrap();
        assert_eq!(parse_state(&line, "-3").unwrap(), State::LinePoint(-3));
        assert!(matches!(
            parse_target(&line, "minus_infinity").unwrap(),
            CompactificationPoint::Boundary(BoundaryPoint::MinusInfinity)
        ));
        assert_eq!(parse_cylinder(&line, "plus").unwrap(), CylinderSet::LinePlus);

        let lattice = parse_chain("lattice3d").unwrap();
        assert_eq!(
            parse_state(&lattice, "1,-2,0").unwrap(),
            State::LatticePoint([1, -2, 0])
        );
        assert!(matches!(
            parse_target(&lattice, "state:0,0,1").unwrap(),
            CompactificationPoint::Interior(_)
        ));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(parse_chain("regular_tree:2").is_err());
        assert!(parse_chain("mystery").is_err());
        let tree = parse_chain("regular_tree:3").unwrap();
        // Letters after the first must stay below degree - 1.
        assert!(parse_state(&tree, "0,2").is_err());
        assert!(parse_target(&tree, "plus_infinity").is_err());
        let line = parse_chain("drifted_line:0.8").unwrap();
        assert!(parse_state(&line, "1,2").is_err());
        assert!(parse_cylinder(&line, "full").is_err());
    }
}
