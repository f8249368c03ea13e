//! Safe-arrival probability of a strategy from every start cell, printed as
//! a grid (top row first) and as CSV.

use hilsynth::gridworld::{build_pomdp, Pos, ScenarioConfig};
use hilsynth::model::ObservationStrategy;
use hilsynth::verify::heatmap;

fn main() {
    let config = ScenarioConfig::new(5, 5, Pos::new(4, 4), Pos::new(3, 0)).with_landmarks([Pos::new(1, 3), Pos::new(3, 2)]);
    let grid = build_pomdp(&config).unwrap();
    let strategy = ObservationStrategy::uniform(&grid.pomdp);
    let map = heatmap(&grid, &strategy).unwrap();
    for row in map.grid().iter().rev() {
        let cells: Vec<String> = row.iter().map(|c| c.map_or("  -  ".into(), |p| format!("{p:.3}"))).collect();
        println!("{}", cells.join(" "));
    }
    println!();
    print!("{}", map.to_csv());
}
