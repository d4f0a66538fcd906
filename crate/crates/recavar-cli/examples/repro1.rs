use recavar::optimize::{solve_mean_risk, UncertaintyModel};
use recavar::scenarios::ScenarioSet;
use recavar::LevelFunction;

fn main() {
    let scen = ScenarioSet::exact_two_point(0.005, 0.999, -0.04, 0.1).unwrap();
    let gamma = LevelFunction::from_pairs(&[(0.008, 0.99), (0.01, 1.0)]).unwrap();
    let opt = solve_mean_risk(&scen, &gamma, 0.0, &UncertaintyModel::Nominal).unwrap();
    println!("status {:?} risk {:.17} weights {:?}", opt.status, opt.risk, opt.weights.map(|w| w.weights().to_vec()));
}
