//! One mode-2 episode on the fork layout with each robot policy, showing
//! where the robot went and why.

use jointplan::sim::{
    bundled_layout, compute_metrics, run_mode2_episode, Mode2Options, RobotPolicy, ScriptedHuman,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let layout = bundled_layout("fork").expect("bundled");
    let human = ScriptedHuman::rational(layout.plans[0].clone());
    for policy in [RobotPolicy::Intent, RobotPolicy::Nearest] {
        let log = run_mode2_episode(&layout, &human, policy, &Mode2Options::default())?;
        println!("{policy} robot:");
        let mut last = None;
        for tick in &log.ticks {
            let now = (&tick.decision.target, tick.decision.mode);
            if last != Some(now) {
                println!(
                    "  t={:4.1} human heading to {} ({:.2}) robot -> {} [{:?}]",
                    tick.t, tick.top, tick.rho, tick.decision.target, tick.decision.mode
                );
                last = Some(now);
            }
            for id in &tick.completed {
                let who = if tick.human_completed.contains(id) {
                    "human"
                } else {
                    "robot"
                };
                println!("  t={:4.1} {id} done by {who}", tick.t);
            }
        }
        let m = compute_metrics(&log);
        println!(
            "  finished in {:.1} s, human walked {:.2} m, robot {:.2} m\n",
            m.time, m.human_dist, m.robot_dist
        );
    }
    Ok(())
}
