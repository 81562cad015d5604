#![cfg(unix)]

use gpmotpe::problems::{Evaluator, ExternalCommand, ExternalEvaluator, ExternalProblem};
use gpmotpe::{DesignPoint, Error, RngStream, SearchSpace};

fn sh(script: &str, m: usize, timeout_secs: f64) -> ExternalEvaluator {
    ExternalEvaluator::new(ExternalCommand {
        argv: vec!["sh".into(), "-c".into(), script.into()],
        n_objectives: m,
        timeout_secs,
    })
    .unwrap()
}

// Echoes r lines of "<id> x1+x2 x1*x2".
const SUM_PRODUCT: &str = r#"read id r x1 x2
i=0
while [ $i -lt $r ]; do
  echo "$id $(awk "BEGIN{print $x1+$x2, $x1*$x2}")"
  i=$((i+1))
done"#;

#[test]
fn round_trip_through_a_shell_program() {
    let ev = sh(SUM_PRODUCT, 2, 10.0);
    let reps = ev.evaluate(&DesignPoint::new(vec![0.5, 2.0]), 3).unwrap();
    assert_eq!(reps.len(), 3);
    for r in &reps {
        assert!((r[0] - 2.5).abs() < 1e-12);
        assert!((r[1] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn works_as_an_evaluator() {
    let problem = ExternalProblem {
        space: SearchSpace::unit_cube(2).unwrap(),
        evaluator: sh(SUM_PRODUCT, 2, 10.0),
    };
    let mut rng = RngStream::new(0, 0).rng();
    let reps = problem.evaluate(&DesignPoint::new(vec![0.25, 0.5]), 2, &mut rng).unwrap();
    assert_eq!(reps, vec![vec![0.75, 0.125]; 2]);
    assert_eq!(problem.n_objectives(), 2);
}

#[test]
fn nonzero_exit_reports_stderr_and_point() {
    let ev = sh("read line; echo 'model diverged' >&2; exit 3", 2, 10.0);
    match ev.evaluate(&DesignPoint::new(vec![0.1, 0.2]), 1) {
        Err(Error::Evaluation { point, reason }) => {
            assert_eq!(point, vec![0.1, 0.2]);
            assert!(reason.contains("model diverged"), "{reason}");
        }
        other => panic!("expected an evaluation error, got {other:?}"),
    }
}

#[test]
fn slow_program_times_out() {
    let ev = sh("read line; sleep 5; echo never", 2, 0.3);
    let start = std::time::Instant::now();
    let err = ev.evaluate(&DesignPoint::new(vec![0.1, 0.2]), 1).unwrap_err();
    assert!(matches!(err, Error::Evaluation { .. }), "{err:?}");
    assert!(start.elapsed().as_secs_f64() < 4.0);
}

#[test]
fn malformed_response_is_rejected() {
    for script in [
        // wrong id
        "read id r rest; echo \"999 1 2\"",
        // too few objectives
        "read id r rest; echo \"$id 1\"",
        // not a number
        "read id r rest; echo \"$id 1 nope\"",
        // too few lines
        "read id r rest; true",
    ] {
        let ev = sh(script, 2, 10.0);
        let res = ev.evaluate(&DesignPoint::new(vec![0.1, 0.2]), 1);
        assert!(matches!(res, Err(Error::Evaluation { .. })), "{script}: {res:?}");
    }
}

#[test]
fn missing_program_is_an_evaluation_error() {
    let ev = ExternalEvaluator::new(ExternalCommand {
        argv: vec!["/nonexistent/objective".into()],
        n_objectives: 1,
        timeout_secs: 1.0,
    })
    .unwrap();
    assert!(matches!(
        ev.evaluate(&DesignPoint::new(vec![0.0]), 1),
        Err(Error::Evaluation { .. })
    ));
}
