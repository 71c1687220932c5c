use serde::{Deserialize, Serialize};

use crate::hardware::{fit_config, CoreConfig, CostModel, Footprint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeCost {
    /// 0.5 * area / max area + 0.5 * power / max power of the merged core;
    /// infinite when the union fits no config.
    pub cost: f64,
    pub feasible: bool,
    pub config: Option<String>,
}

fn area_power(fp: &Footprint, palette: &[CoreConfig], m: &CostModel) -> Option<(f64, f64, String)> {
    if fp.is_empty() {
        return Some((0.0, 0.0, String::new()));
    }
    fit_config(fp, palette, m)
        .ok()
        .map(|c| (m.area(c), m.static_power(c), c.name.clone()))
}

/// Cost of hosting both sub-networks on one core. Feasible only if the union
/// fits the palette and both area and power are strictly below those of two
/// separate cores.
pub fn merge_cost(si: &Footprint, sj: &Footprint, palette: &[CoreConfig], m: &CostModel) -> MergeCost {
    let infeasible = MergeCost {
        cost: f64::INFINITY,
        feasible: false,
        config: None,
    };
    let merged = *si + *sj;
    let Some((am, pm, name)) = area_power(&merged, palette, m) else {
        return infeasible;
    };
    let (Some((ai, pi, _)), Some((aj, pj, _))) = (area_power(si, palette, m), area_power(sj, palette, m))
    else {
        return infeasible;
    };
    let a_max = palette.iter().map(|c| m.area(c)).fold(0.0, f64::max);
    let p_max = palette.iter().map(|c| m.static_power(c)).fold(0.0, f64::max);
    MergeCost {
        cost: 0.5 * am / a_max + 0.5 * pm / p_max,
        feasible: am < ai + aj && pm < pi + pj,
        config: Some(name),
    }
}
