//! Observation vectors around the agent and the feature classes that pool
//! observation/action pairs for cloning.

use hilsynth::features::{class_stats, feature, ClassTable};
use hilsynth::gridworld::{observe, Action, GridState, ObsVector, Pos, ScenarioConfig};

fn main() {
    let config = ScenarioConfig::new(6, 6, Pos::new(5, 5), Pos::new(3, 3)).with_landmarks([Pos::new(1, 3)]);
    for agent in [Pos::new(0, 0), Pos::new(2, 2), Pos::new(2, 3), Pos::new(4, 4)] {
        let z = observe(GridState::new(agent, config.obstacle_start), &config);
        println!("agent {agent}: {z}");
    }

    // two views that call for the same kind of move
    let down_left = ObsVector::from_set([1]);
    let up_right = ObsVector::from_set([5]);
    println!("f({down_left}, right) = {:?}", feature(down_left, Action::Right));
    println!("f({up_right}, left)  = {:?}", feature(up_right, Action::Left));

    let table = ClassTable::by_features();
    let stats = class_stats(&table);
    println!(
        "{} classes over 1024 pairs, largest {} ({} per action), mean {:.1}",
        stats.classes, stats.largest, stats.largest_per_action, stats.mean_size
    );
}
