use criterion::{black_box, criterion_group, criterion_main, Criterion};
use loopgraft_bench::{insert, scaffold};
use loopgraft_core::dynamics::enm::{anm_msf, gnm_msf};
use loopgraft_core::dynamics::{
    motion_cross_correlation, DEFAULT_ANM_CUTOFF, DEFAULT_CORRELATION_MODES, DEFAULT_GNM_CUTOFF,
};
use loopgraft_core::grafting::splice;
use loopgraft_core::loop_model::extract_loops;
use loopgraft_core::secondary_structure::assign_secondary_structure;
use loopgraft_core::{ca_trace, parse_pdb, write_pdb, GraftPair, GraftSpec};

fn structure_io(c: &mut Criterion) {
    let text = write_pdb(&scaffold());
    c.bench_function("parse_pdb", |b| {
        b.iter(|| parse_pdb(black_box(text.as_bytes())).unwrap())
    });
    let s = scaffold();
    c.bench_function("write_pdb", |b| b.iter(|| write_pdb(black_box(&s))));
}

fn secondary_structure(c: &mut Criterion) {
    let s = scaffold();
    c.bench_function("assign_secondary_structure", |b| {
        b.iter(|| assign_secondary_structure(black_box(&s), 'A').unwrap())
    });
}

fn dynamics(c: &mut Criterion) {
    let s = scaffold();
    let trace = ca_trace(&s, 'A').unwrap();
    c.bench_function("gnm_msf", |b| {
        b.iter(|| gnm_msf(black_box(&trace.positions), DEFAULT_GNM_CUTOFF).unwrap())
    });
    c.bench_function("anm_msf", |b| {
        b.iter(|| anm_msf(black_box(&trace.positions), DEFAULT_ANM_CUTOFF).unwrap())
    });
    let ss = assign_secondary_structure(&s, 'A').unwrap();
    let loops = extract_loops(&ss, &s.pdb_id).unwrap();
    let refs: Vec<_> = loops.iter().collect();
    c.bench_function("motion_cross_correlation", |b| {
        b.iter(|| {
            motion_cross_correlation(black_box(&trace), &refs, DEFAULT_GNM_CUTOFF, DEFAULT_CORRELATION_MODES).unwrap()
        })
    });
}

fn grafting(c: &mut Criterion) {
    let (s, i) = (scaffold(), insert());
    let spec = GraftSpec::new(
        'A',
        'A',
        vec![GraftPair {
            scaffold_loop_id: "1SCF_A_2".into(),
            insert_loop_id: "2INS_A_2".into(),
            scaffold_start: 12,
            scaffold_end: 20,
            insert_start: 13,
            insert_end: 23,
        }],
    );
    c.bench_function("splice", |b| {
        b.iter(|| splice(black_box(&s), black_box(&i), &spec).unwrap())
    });
}

criterion_group!(benches, structure_io, secondary_structure, dynamics, grafting);
criterion_main!(benches);
