//! Both store backends against an in-memory reference under random operations.

use proptest::prelude::*;
use rand::Rng;
use veclstm::nn::seeded_rng;
use veclstm::vecstore::*;

const GRID: usize = 3;
const USERS: [&str; 4] = ["000", "001", "017", "163"];

#[derive(Debug, Clone)]
enum Op {
    Insert(Vec<VectorRecord>),
    Fetch(RecordFilter),
    Count,
}

#[derive(Debug, PartialEq)]
enum Observed {
    Inserted(Result<usize, String>),
    Fetched(Vec<(u64, String, u8, i64, Vec<u32>)>),
    Count(u64),
}

fn bits(records: Vec<VectorRecord>) -> Vec<(u64, String, u8, i64, Vec<u32>)> {
    records
        .into_iter()
        .map(|r| (r.record_id, r.user, r.label, r.created_at, r.vector.iter().map(|v| v.to_bits()).collect()))
        .collect()
}

#[derive(Default)]
struct Reference {
    records: Vec<VectorRecord>,
}

impl Reference {
    fn apply(&mut self, op: &Op) -> Observed {
        match op {
            Op::Insert(batch) => {
                if batch.iter().any(|r| r.vector.len() != GRID * GRID || r.label > 6) {
                    return Observed::Inserted(Err("validation".into()));
                }
                for r in batch {
                    let id = self.records.len() as u64 + 1;
                    self.records.push(VectorRecord { record_id: id, ..r.clone() });
                }
                Observed::Inserted(Ok(batch.len()))
            }
            Op::Fetch(f) => Observed::Fetched(bits(self.records.iter().filter(|r| f.matches(r)).cloned().collect())),
            Op::Count => Observed::Count(self.records.len() as u64),
        }
    }
}

fn apply(store: &mut StoreHandle, op: &Op) -> Observed {
    match op {
        Op::Insert(batch) => Observed::Inserted(store.insert_batch(batch).map_err(|e| match e {
            StoreError::Validation(_) => "validation".to_string(),
            other => other.to_string(),
        })),
        Op::Fetch(f) => Observed::Fetched(bits(store.fetch(f).unwrap())),
        Op::Count => Observed::Count(store.count().unwrap()),
    }
}

fn random_record<R: Rng>(rng: &mut R) -> VectorRecord {
    let mut vector: Vec<f32> = (0..GRID * GRID).map(|_| rng.gen_range(-1e3f32..1e3)).collect();
    if rng.gen_bool(0.1) {
        vector[0] = f32::from_bits(rng.gen());
    }
    if rng.gen_bool(0.05) {
        vector.pop();
    }
    VectorRecord {
        record_id: rng.gen(),
        user: USERS[rng.gen_range(0..USERS.len())].into(),
        label: if rng.gen_bool(0.03) { 7 } else { rng.gen_range(0..7) },
        vector,
        created_at: rng.gen_range(-1_000_000_000i64..2_000_000_000),
    }
}

fn random_ops(n: usize, seed: u64) -> Vec<Op> {
    let mut rng = seeded_rng(seed);
    (0..n)
        .map(|_| match rng.gen_range(0..10) {
            0..=3 => Op::Insert((0..rng.gen_range(0..5)).map(|_| random_record(&mut rng)).collect()),
            4..=7 => {
                let min_id: Option<u64> = rng.gen_bool(0.3).then(|| rng.gen_range(0..200));
                Op::Fetch(RecordFilter {
                    user: rng.gen_bool(0.5).then(|| USERS[rng.gen_range(0..USERS.len())].into()),
                    label: rng.gen_bool(0.5).then(|| rng.gen_range(0..7)),
                    min_id,
                    max_id: rng.gen_bool(0.3).then(|| min_id.unwrap_or(0) + rng.gen_range(0..100)),
                })
            }
            _ => Op::Count,
        })
        .collect()
}

fn run_against_reference(descriptor: &str, ops: &[Op]) -> Vec<Observed> {
    let mut store = open_store(descriptor, GRID).unwrap();
    store.init_schema().unwrap();
    let mut reference = Reference::default();
    let mut seen = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        let expected = reference.apply(op);
        let got = apply(&mut store, op);
        assert_eq!(got, expected, "{} diverged at op {i}: {op:?}", store.backend());
        seen.push(got);
        let all = store.fetch(&RecordFilter::default()).unwrap();
        assert_eq!(store.count().unwrap(), all.len() as u64);
    }
    store.close().unwrap();
    seen
}

#[test]
fn five_hundred_ops_on_both_backends() {
    check_five_hundred_ops_on_both_backends();
}

pub fn check_five_hundred_ops_on_both_backends() {
    let dir = tempfile::tempdir().unwrap();
    let ops = random_ops(500, 77);
    let file = run_against_reference(dir.path().join("v.vlvs").to_str().unwrap(), &ops);
    let sql = run_against_reference(&format!("sqlite://{}", dir.path().join("v.db").display()), &ops);
    assert_eq!(file, sql);
}

#[test]
fn file_store_survives_reopen() {
    check_file_store_survives_reopen();
}

pub fn check_file_store_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.vlvs");
    let desc = path.to_str().unwrap();
    let mut rng = seeded_rng(5);
    let batch: Vec<VectorRecord> = (0..40)
        .map(|_| random_record(&mut rng))
        .filter(|r| r.vector.len() == GRID * GRID && r.label < 7)
        .collect();
    let mut store = open_store(desc, GRID).unwrap();
    store.init_schema().unwrap();
    store.insert_batch(&batch).unwrap();
    let before = store.fetch(&RecordFilter::default()).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    store.close().unwrap();

    let mut reopened = open_store(desc, GRID).unwrap();
    reopened.init_schema().unwrap();
    let after = reopened.fetch(&RecordFilter::default()).unwrap();
    assert_eq!(before.len(), after.len());
    assert!(before.iter().zip(&after).all(|(a, b)| a.same_bits(b)));
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
}

#[test]
fn sql_store_survives_reopen() {
    check_sql_store_survives_reopen();
}

pub fn check_sql_store_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let desc = format!("sqlite://{}", dir.path().join("v.db").display());
    let mut rng = seeded_rng(6);
    let batch: Vec<VectorRecord> = (0..10).map(|_| random_record(&mut rng)).filter(|r| r.vector.len() == 9 && r.label < 7).collect();
    let mut store = open_store(&desc, GRID).unwrap();
    store.init_schema().unwrap();
    store.insert_batch(&batch).unwrap();
    store.close().unwrap();
    let mut again = open_store(&desc, GRID).unwrap();
    again.init_schema().unwrap();
    assert_eq!(again.count().unwrap(), batch.len() as u64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn backends_agree_on_random_sequences(seed in any::<u64>(), n in 1usize..60) {
        let dir = tempfile::tempdir().unwrap();
        let ops = random_ops(n, seed);
        let file = run_against_reference(dir.path().join("v.vlvs").to_str().unwrap(), &ops);
        let sql = run_against_reference("sqlite::memory:", &ops);
        prop_assert_eq!(file, sql);
    }
}
