use serde::Serialize;

use crate::netsim::{NetError, PathConstraints, World};

use super::{summarize, BenchError, Stats};

/// Build times of a batch of circuits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircuitBenchmark {
    pub suite: String,
    pub stats: Stats,
    pub build_times_ms: Vec<f64>,
    /// Paths of the successful builds, as node indices.
    pub paths: Vec<Vec<usize>>,
    pub failures: usize,
}

/// Round trips through fresh circuits against direct client↔server fetches.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FetchBenchmark {
    pub suite: String,
    pub request_bytes: usize,
    pub response_bytes: usize,
    pub circuit: Stats,
    pub direct: Stats,
    /// Mean circuit round trip minus mean direct round trip.
    pub overhead_ms: f64,
    pub cells_fwd: usize,
    pub cells_bwd: usize,
    pub failures: usize,
}

/// Rendezvous setup and fetch times for an onion service.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OnionBenchmark {
    pub service: String,
    pub suite: String,
    pub request_bytes: usize,
    pub response_bytes: usize,
    pub connect: Stats,
    pub fetch: Stats,
    pub failures: usize,
}

fn is_circuit_failure(e: &NetError) -> bool {
    matches!(e, NetError::CircuitFailed { .. } | NetError::CircuitNotOpen(_))
}

fn check_n(n: usize) -> Result<(), BenchError> {
    if n == 0 {
        return Err(BenchError::InvalidArgument("at least one run is required".into()));
    }
    Ok(())
}

fn summarize_runs(samples: &[f64], failures: usize) -> Result<Stats, BenchError> {
    if samples.is_empty() {
        return Err(BenchError::NoSuccessfulRuns(failures));
    }
    summarize(samples)
}

/// Builds and closes `n` circuits over fresh random paths.
pub fn run_circuit_benchmark(world: &mut World, n: usize, suite: &str) -> Result<CircuitBenchmark, BenchError> {
    check_n(n)?;
    world.suite(suite)?;
    let (mut times, mut paths, mut failures) = (Vec::with_capacity(n), Vec::with_capacity(n), 0);
    for _ in 0..n {
        let path = world.select_path(&PathConstraints::default())?;
        match world.build_circuit(&path, suite) {
            Ok((h, t)) => {
                times.push(t.as_millis_f64());
                paths.push(path);
                world.close_circuit(h)?;
            }
            Err(e) if is_circuit_failure(&e) => {
                failures += 1;
                world.run_idle()?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(CircuitBenchmark {
        suite: suite.to_string(),
        stats: summarize_runs(&times, failures)?,
        build_times_ms: times,
        paths,
        failures,
    })
}

/// Per run: builds a circuit, fetches through it, closes it, then performs
/// the same exchange directly.
pub fn run_fetch_benchmark(
    world: &mut World,
    n: usize,
    suite: &str,
    request_bytes: usize,
    response_bytes: usize,
) -> Result<FetchBenchmark, BenchError> {
    check_n(n)?;
    let (mut circ, mut direct, mut failures) = (Vec::new(), Vec::new(), 0);
    let (mut cells_fwd, mut cells_bwd) = (0, 0);
    for _ in 0..n {
        let path = world.select_path(&PathConstraints::default())?;
        let attempt = world
            .build_circuit(&path, suite)
            .and_then(|(h, _)| Ok((h, world.fetch(h, request_bytes, response_bytes)?)));
        match attempt {
            Ok((h, r)) => {
                circ.push(r.rtt.as_millis_f64());
                (cells_fwd, cells_bwd) = (r.cells_fwd, r.cells_bwd);
                world.close_circuit(h)?;
            }
            Err(e) if is_circuit_failure(&e) => {
                failures += 1;
                world.run_idle()?;
            }
            Err(e) => return Err(e.into()),
        }
        direct.push(world.direct_fetch(request_bytes, response_bytes)?.rtt.as_millis_f64());
    }
    let circuit = summarize_runs(&circ, failures)?;
    let direct = summarize(&direct)?;
    Ok(FetchBenchmark {
        suite: suite.to_string(),
        request_bytes,
        response_bytes,
        overhead_ms: circuit.mean - direct.mean,
        circuit,
        direct,
        cells_fwd,
        cells_bwd,
        failures,
    })
}

/// Per run: connects to `service` through a rendezvous point, fetches, and
/// closes the connection.
pub fn run_onion_benchmark(
    world: &mut World,
    n: usize,
    service: &str,
    suite: &str,
    request_bytes: usize,
    response_bytes: usize,
) -> Result<OnionBenchmark, BenchError> {
    check_n(n)?;
    let (mut connect, mut fetch, mut failures) = (Vec::new(), Vec::new(), 0);
    for _ in 0..n {
        let attempt = world.onion_service_connect(service, suite).and_then(|c| {
            let r = world.fetch(c.circuit, request_bytes, response_bytes)?;
            Ok((c, r))
        });
        match attempt {
            Ok((c, r)) => {
                connect.push(c.time.as_millis_f64());
                fetch.push(r.rtt.as_millis_f64());
                world.close_circuit(c.circuit)?;
            }
            Err(e) if is_circuit_failure(&e) => {
                failures += 1;
                world.run_idle()?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(OnionBenchmark {
        service: service.to_string(),
        suite: suite.to_string(),
        request_bytes,
        response_bytes,
        connect: summarize_runs(&connect, failures)?,
        fetch: summarize_runs(&fetch, failures)?,
        failures,
    })
}
