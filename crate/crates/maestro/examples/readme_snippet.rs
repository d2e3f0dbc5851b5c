//! The README's library quick tour: a thousand curriculum updates on the
//! tag gridworld, driven directly through the library API.

use maestro::curriculum::{curriculum_step, CurriculumConfig, LaserTagDomain, Method, TrainState};
use maestro::lasertag::NUM_ACTIONS;
use maestro::learner::{ObsEncoding, PolicyParams, PpoConfig, Student};
use maestro::regret::RegretEstimator;
use maestro::rng::RngHandle;

fn main() {
    let cfg = CurriculumConfig::lasertag_default(Method::Maestro);
    let domain = LaserTagDomain::new(PpoConfig::lasertag_default(), RegretEstimator::MaxMc, 64);
    let mut rng = RngHandle::from_seed(7);
    let student = Student::new(PolicyParams::mlp_init(ObsEncoding::lasertag(), NUM_ACTIONS, 32, &mut rng));
    let mut state = TrainState::new(&domain, student, &cfg).unwrap();

    while state.updates < 1_000 {
        let event = curriculum_step(&domain, &mut state, &cfg, &mut rng).unwrap();
        if event.trained { /* inspect event.score, event.branch, ... */ }
    }
}
