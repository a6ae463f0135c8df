//! Synthetic worlds for the end-to-end runs: an open floor, a wall with a
//! doorway and a low arch that the UAV has to climb over.

use serde::Serialize;
use tether_core::environment::OccupancyGrid;
use tether_core::planner::MarsupialConfig;
use tether_core::Vec3;

#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub name: &'static str,
    #[serde(skip)]
    pub grid: OccupancyGrid,
    pub start: MarsupialConfig,
    pub goal_uav: Vec3,
    pub l_max: f64,
}

pub const NAMES: [&str; 3] = ["open", "doorway", "arch"];

const SIZE: [f64; 3] = [12.0, 8.0, 6.0];

fn base(res: f64) -> OccupancyGrid {
    let dims = SIZE.map(|s| (s / res).round() as usize);
    let mut g = OccupancyGrid::new(res, Vec3::zeros(), dims).expect("positive resolution and size");
    g.fill_ground();
    g
}

fn floor_z(res: f64) -> f64 {
    1.5 * res
}

/// Snaps a world point to the centre of its cell.
fn centre(g: &OccupancyGrid, x: f64, y: f64, z: f64) -> Vec3 {
    let c = |v: f64, k: usize| ((v / g.resolution).floor().max(0.0) as usize).min(g.dims[k] - 1);
    g.cell_center(c(x, 0), c(y, 1), c(z, 2))
}

pub fn build(name: &str, res: f64) -> Option<Scenario> {
    let mut grid = base(res);
    let (name, goal) = match name {
        "open" => ("open", Vec3::new(9.0, 4.0, 2.5)),
        "doorway" => {
            grid.fill_box(Vec3::new(5.5, 0.0, 0.0), Vec3::new(6.0, 2.0, 6.0));
            grid.fill_box(Vec3::new(5.5, 6.0, 0.0), Vec3::new(6.0, 8.0, 6.0));
            ("doorway", Vec3::new(10.0, 4.0, 2.5))
        }
        "arch" => {
            grid.fill_box(Vec3::new(5.5, 0.0, 0.0), Vec3::new(6.0, 2.0, 3.5));
            grid.fill_box(Vec3::new(5.5, 6.0, 0.0), Vec3::new(6.0, 8.0, 3.5));
            grid.fill_box(Vec3::new(5.5, 2.0, 2.0), Vec3::new(6.0, 6.0, 3.5));
            ("arch", Vec3::new(10.0, 4.0, 3.0))
        }
        _ => return None,
    };
    let z = floor_z(res);
    let p_g = centre(&grid, 2.0, 4.0, z);
    let p_a = centre(&grid, 2.5, 4.0, 2.5);
    let goal_uav = centre(&grid, goal.x, goal.y, goal.z);
    Some(Scenario { name, grid, start: MarsupialConfig::new(p_g, p_a), goal_uav, l_max: 10.0 })
}

pub fn all(res: f64) -> Vec<Scenario> {
    NAMES.iter().filter_map(|n| build(n, res)).collect()
}
