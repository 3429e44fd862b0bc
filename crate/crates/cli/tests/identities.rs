use bergman_cli::identities::{run_battery, IdentityConfig, RuleOverride, Status};
use bergman_core::SpaceParams;

#[test]
fn default_battery_passes() {
    let cfg = IdentityConfig::new(SpaceParams::new(1, 0.0).unwrap());
    let report = run_battery(&cfg).unwrap();
    println!("{}", report.to_text());
    assert_eq!(report.count(Status::Pass), report.checks.len(), "{}", report.to_text());
}

#[test]
fn coarse_rule_is_inconclusive_not_failed() {
    let mut cfg = IdentityConfig::new(SpaceParams::new(1, 0.0).unwrap());
    cfg.max_degree = 8;
    cfg.rule = Some(RuleOverride {
        radial_points: 3,
        angular_points: 5,
    });
    let report = run_battery(&cfg).unwrap();
    assert!(report.count(Status::Inconclusive) > 0, "{}", report.to_text());
    assert_eq!(report.count(Status::Fail), 0, "{}", report.to_text());
}
