use super::*;
use crate::model::fixtures::figure1;
use crate::model::LinkSpec;
use traffic::{LengthDist, ScriptedPacket, StreamConfig};

fn fig1() -> Topology {
    figure1()
}

fn n(t: &Topology, name: &str) -> NodeId {
    t.node_id(name).unwrap()
}

fn nodes(t: &Topology, names: &[&str]) -> Vec<NodeId> {
    names.iter().map(|x| n(t, x)).collect()
}

fn link(t: &Topology, a: &str, b: &str) -> LinkId {
    t.link_between(n(t, a), n(t, b)).unwrap()
}

fn scripted(t: &Topology, at: u64, src: &str, dst: &str, len: u64) -> ScriptedPacket {
    ScriptedPacket {
        at: SimTime(at),
        source: n(t, src),
        dest: n(t, dst),
        class_index: 0,
        length: len,
    }
}

fn poisson(t: &Topology, src: &str, dst: &str, rate: f64) -> StreamConfig {
    StreamConfig {
        source: n(t, src),
        dest: n(t, dst),
        class_index: 0,
        rate_pps: rate,
        length: LengthDist::Uniform { min: 100, max: 1500 },
    }
}

fn loaded(horizon: u64) -> Scenario {
    let t = fig1();
    let mut sc = Scenario::new(t.clone());
    sc.traffic.streams = vec![poisson(&t, "N1", "N10", 50_000.0), poisson(&t, "N2", "N9", 20_000.0)];
    sc.traffic.seed = 11;
    sc.horizon = SimTime(horizon);
    sc.traffic_until = SimTime(horizon - 2_000);
    sc
}

#[test]
fn inject_fault_orders_and_validates() {
    let t = fig1();
    let l = link(&t, "N6", "N10");
    let ok = inject_fault(
        &t,
        &[
            FaultSpec {
                link: l,
                fail_at: SimTime(500),
                repair_at: Some(SimTime(900)),
            },
            FaultSpec {
                link: l,
                fail_at: SimTime(900),
                repair_at: None,
            },
        ],
    )
    .unwrap();
    assert_eq!(
        ok,
        vec![
            (SimTime(500), FaultEvent::Fail(l)),
            (SimTime(900), FaultEvent::Repair(l)),
            (SimTime(900), FaultEvent::Fail(l)),
        ]
    );
    let bad = inject_fault(
        &t,
        &[
            FaultSpec {
                link: l,
                fail_at: SimTime(500),
                repair_at: Some(SimTime(400)),
            },
            FaultSpec {
                link: LinkId(99),
                fail_at: SimTime(1),
                repair_at: None,
            },
        ],
    )
    .unwrap_err();
    assert_eq!(bad.len(), 2);
    let overlap = inject_fault(
        &t,
        &[
            FaultSpec {
                link: l,
                fail_at: SimTime(500),
                repair_at: None,
            },
            FaultSpec {
                link: l,
                fail_at: SimTime(700),
                repair_at: Some(SimTime(800)),
            },
        ],
    )
    .unwrap_err();
    assert_eq!(overlap[0].path, "faults[1]");
}

#[test]
fn no_fault_run_delivers_everything() {
    for alg in Algorithm::ALL {
        let mut sc = loaded(20_000);
        sc.assembler.algorithm = alg;
        let r = run(&sc).unwrap();
        assert!(r.generated > 500, "{alg}: {}", r.generated);
        assert_eq!(r.lost, 0, "{alg}");
        assert_eq!(r.in_flight, 0, "{alg}");
        assert!(r.is_conserved());
        assert_eq!(r.delivered + r.queued, r.generated);
        assert_eq!(r.packet_loss_rate, 0.0);
    }
}

#[test]
fn single_burst_timing() {
    // One packet, FAP period 100: burst at 100, header leaves N1 at 100,
    // payload at 160, three hops of 10us each on [N1,N6,N10].
    let t = fig1();
    let mut sc = Scenario::new(t.clone());
    sc.traffic.scripted = vec![scripted(&t, 0, "N1", "N10", 500)];
    let out = run_with(&sc, RunOptions { trace: true }).unwrap();
    assert_eq!(out.bursts.len(), 1);
    let b = &out.bursts[0];
    assert_eq!(b.primary_route, nodes(&t, &["N1", "N6", "N10"]));
    assert_eq!(b.status, BurstStatus::Delivered { at: SimTime(180) });
    let hops: Vec<_> = b.header_hops.iter().map(|h| (h.at.0, h.action.as_str())).collect();
    assert_eq!(hops, vec![(100, "forward"), (120, "forward"), (140, "terminate")]);
    assert_eq!(out.report.delay.max_us, 180);
    assert_eq!(out.report.total_byte_hops, 1000);
    assert_eq!(out.report.mean_assembly_delay_us, 100.0);
}

/// Burst 0 runs into the dead link and teaches N6; burst 1 is rerouted at
/// N6 and rejoins at N10.
fn restoration_script() -> Scenario {
    let t = fig1();
    let mut sc = Scenario::new(t.clone());
    sc.traffic.scripted = vec![scripted(&t, 0, "N1", "N10", 500), scripted(&t, 1_000, "N1", "N10", 700)];
    sc.faults = vec![FaultSpec {
        link: link(&t, "N6", "N10"),
        fail_at: SimTime(50),
        repair_at: None,
    }];
    sc
}

#[test]
fn restoration_header_evolution() {
    let sc = restoration_script();
    let t = &sc.topology;
    let out = run_with(&sc, RunOptions { trace: true }).unwrap();
    assert_eq!(out.bursts.len(), 2);

    let first = &out.bursts[0];
    assert_eq!(
        first.status,
        BurstStatus::Lost {
            at: SimTime(170),
            reason: LossReason::LinkFailure
        }
    );

    let second = &out.bursts[1];
    let got: Vec<_> = second
        .header_hops
        .iter()
        .map(|h| {
            (
                t.name(h.node).to_string(),
                h.action.clone(),
                h.successor.map(|s| t.name(s).to_string()),
                h.on_optimum_flag,
                t.path_label(&h.bypass_route),
            )
        })
        .collect();
    let s = |x: &str| Some(x.to_string());
    let bypass = "[N6,N7,N5,N10]".to_string();
    assert_eq!(
        got,
        vec![
            ("N1".into(), "forward".into(), s("N6"), true, "[]".into()),
            ("N6".into(), "reroute".into(), s("N7"), false, bypass.clone()),
            ("N7".into(), "forward".into(), s("N5"), false, bypass.clone()),
            ("N5".into(), "forward".into(), s("N10"), true, bypass.clone()),
            ("N10".into(), "terminate".into(), None, true, bypass),
        ]
    );
    assert!(matches!(second.status, BurstStatus::Delivered { .. }));
    let payload: Vec<NodeId> = std::iter::once(second.payload_transmissions[0].from)
        .chain(second.payload_transmissions.iter().map(|x| x.to))
        .collect();
    assert_eq!(payload, nodes(t, &["N1", "N6", "N7", "N5", "N10"]));

    let r = &out.report;
    assert_eq!(r.protocol.ack_timeouts, 1);
    assert_eq!(r.protocol.links_suspected, 1);
    assert_eq!(r.protocol.reroutes, 1);
    assert_eq!(r.protocol.loss_of_light.len(), 2);
    let f = &r.faults[0];
    // Burst 0 header reached N6 at 110 and was processed at 120.
    assert_eq!(f.detected_at_us, Some(170));
    assert!(f.recovery_time_us.is_some());
    assert!(r.is_conserved());
}

#[test]
fn source_detection_needs_spare_offset() {
    // The source learns of a dead first link t_s after sending the header.
    // With the bare offset the payload has already been committed to it.
    let t = fig1();
    let mut sc = Scenario::new(t.clone());
    sc.traffic.scripted = vec![scripted(&t, 0, "N1", "N10", 500)];
    sc.faults = vec![FaultSpec {
        link: link(&t, "N1", "N6"),
        fail_at: SimTime(10),
        repair_at: None,
    }];
    let out = run_with(&sc, RunOptions::default()).unwrap();
    assert_eq!(
        out.bursts[0].status,
        BurstStatus::Lost {
            at: SimTime(160),
            reason: LossReason::LinkFailure
        }
    );

    // A class offset gives the rerouted header room to stay ahead.
    sc.assembler.algorithm = Algorithm::PriorityAas;
    sc.assembler.priority.offset = vec![SimTime(200), SimTime(0)];
    let out = run_with(&sc, RunOptions::default()).unwrap();
    let b = &out.bursts[0];
    assert!(matches!(b.status, BurstStatus::Delivered { .. }), "{:?}", b.status);
    let actions: Vec<_> = b.header_hops.iter().map(|h| h.action.as_str()).collect();
    assert_eq!(actions[..2], ["forward", "reroute"]);
    assert!(b.payload_transmissions.iter().all(|x| x.link != link(&t, "N1", "N6")));
}

#[test]
fn repair_restores_primary_route() {
    let t = fig1();
    let mut sc = restoration_script();
    sc.faults[0].repair_at = Some(SimTime(2_000));
    sc.traffic.scripted.push(scripted(&t, 3_000, "N1", "N10", 300));
    let out = run_with(&sc, RunOptions::default()).unwrap();
    let last = out.bursts.last().unwrap();
    assert!(matches!(last.status, BurstStatus::Delivered { .. }));
    assert_eq!(last.payload_transmissions.len(), 2);
}

#[test]
fn disconnection_drops_with_no_bypass() {
    // A pendant node whose only link dies.
    let names = ["A", "B", "C"];
    let t = Topology::build(&names, &[LinkSpec::new("A", "B", 1.0), LinkSpec::new("B", "C", 1.0)]).unwrap();
    let mut sc = Scenario::new(t.clone());
    sc.traffic.scripted = vec![scripted(&t, 0, "A", "C", 100), scripted(&t, 1_000, "A", "C", 100)];
    sc.faults = vec![FaultSpec {
        link: link(&t, "B", "C"),
        fail_at: SimTime(0),
        repair_at: None,
    }];
    let r = run(&sc).unwrap();
    assert_eq!(r.lost, 2);
    assert_eq!(r.lost_for(LossReason::LinkFailure), 1);
    assert_eq!(r.lost_for(LossReason::NoBypass), 1);
    assert_eq!(r.protocol.header_drops, 1);
}

#[test]
fn offset_violation_when_offset_too_short() {
    // A long chain with a tiny t_s: the header falls behind the payload.
    let names: Vec<String> = (0..12).map(|i| format!("V{i}")).collect();
    let links: Vec<LinkSpec> = (0..11)
        .map(|i| LinkSpec::new(format!("V{i}"), format!("V{}", i + 1), 1.0).with_delay(SimTime(1)))
        .collect();
    let t = Topology::build(&names, &links).unwrap();
    let mut sc = Scenario::new(t.clone());
    sc.protocol.t_s = SimTime(3);
    sc.traffic.scripted = vec![scripted(&t, 0, "V0", "V11", 100)];
    let r = run(&sc).unwrap();
    assert_eq!(r.lost_for(LossReason::OffsetViolation), 1);

    // H * t_h <= t_h + t_s: no violation.
    sc.protocol.t_s = SimTime(100);
    let r = run(&sc).unwrap();
    assert_eq!(r.lost, 0);
    assert_eq!(r.delivered, 1);
}

#[test]
fn protection_duplicates_and_survives_working_failure() {
    let t = fig1();
    let mut sc = Scenario::new(t.clone());
    sc.mode = Mode::Protection;
    sc.traffic.scripted = vec![scripted(&t, 0, "N1", "N10", 1_000)];
    let out = run_with(&sc, RunOptions::default()).unwrap();
    let (w, b) = protection_paths(&t, n(&t, "N1"), n(&t, "N10")).unwrap();
    assert_eq!(out.report.total_byte_hops, 1_000 * (w.hops() + b.hops()) as u64);
    assert_eq!(out.report.delivered, 1);
    // Protection sends at assembly time, no offset.
    assert_eq!(out.bursts[0].status, BurstStatus::Delivered { at: SimTime(120) });

    sc.faults = vec![FaultSpec {
        link: link(&t, "N6", "N10"),
        fail_at: SimTime(0),
        repair_at: None,
    }];
    let r = run(&sc).unwrap();
    assert_eq!(r.delivered, 1);
    assert_eq!(r.lost, 0);
}

#[test]
fn protection_requires_disjoint_backup() {
    let t = Topology::build(&["A", "B"], &[LinkSpec::new("A", "B", 1.0)]).unwrap();
    let mut sc = Scenario::new(t.clone());
    sc.mode = Mode::Protection;
    sc.traffic.scripted = vec![scripted(&t, 0, "A", "B", 100)];
    match run(&sc) {
        Err(EngineError::Invalid(issues)) => assert_eq!(issues[0].path, "packets[0]"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn validation_collects_all_issues() {
    let t = fig1();
    let mut sc = Scenario::new(t.clone());
    sc.protocol.t_s = SimTime(15);
    sc.assembler.period_threshold = SimTime(0);
    sc.traffic_until = SimTime(20_000);
    sc.traffic.streams = vec![poisson(&t, "N1", "N1", -1.0)];
    let issues = sc.validate();
    let paths: Vec<_> = issues.iter().map(|i| i.path.as_str()).collect();
    for want in ["sim.traffic_until", "assembler.period", "protocol.t_s", "traffic[0].rate_pps", "traffic[0].dest"] {
        assert!(paths.contains(&want), "missing {want} in {paths:?}");
    }
}

#[test]
fn ack_timeout_without_failure_is_impossible() {
    let r = run(&loaded(30_000)).unwrap();
    assert_eq!(r.protocol.ack_timeouts, 0);
}

#[test]
fn trace_is_deterministic() {
    let mut sc = loaded(10_000);
    sc.faults = vec![FaultSpec {
        link: link(&sc.topology, "N6", "N10"),
        fail_at: SimTime(3_000),
        repair_at: Some(SimTime(6_000)),
    }];
    let a = run_with(&sc, RunOptions { trace: true }).unwrap();
    let b = run_with(&sc, RunOptions { trace: true }).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.report, b.report);
    assert!(a.report.is_conserved());
    assert!(a.report.lost > 0);
}
