use dpstore::dp::solve_bucket_offset;
use dpstore::dynamic::Update;
use dpstore::range::{self, RangeParams};
use dpstore::{rng, DpParams, Error, NoiseMode, Record};
use rand::Rng;

fn sorted(mut records: Vec<Record>) -> Vec<(u32, Vec<u8>)> {
    let mut out: Vec<(u32, Vec<u8>)> = records.drain(..).map(|r| (r.key, r.payload)).collect();
    out.sort();
    out
}

fn random_db<R: Rng>(n: usize, domain: u32, rng: &mut R) -> Vec<Record> {
    (0..n)
        .map(|i| Record::new(rng.random_range(1..=domain), format!("r{i}").into_bytes()))
        .collect()
}

#[test]
fn answers_equal_linear_scan() {
    let dp = DpParams::new(1.0, 2f64.powi(-20)).unwrap();
    let mut r = rng::stream(10);
    let mut checked = 0;
    for db in 0..20 {
        let domain = r.random_range(4..=128u32);
        let n = r.random_range(0..=500);
        let records = random_db(n, domain, &mut r);
        let params = RangeParams::new(domain, dp);
        let (client, mut server) = range::setup(&records, &params, &mut rng::substream(11, db)).unwrap();
        for _ in 0..50 {
            let a = r.random_range(1..=domain);
            let b = r.random_range(1..=domain);
            let (lo, hi) = (a.min(b), a.max(b));
            let got = client.query(&mut server, lo, hi).unwrap();
            let want: Vec<Record> = records.iter().filter(|x| lo <= x.key && x.key <= hi).cloned().collect();
            assert_eq!(sorted(got), sorted(want), "db {db} range [{lo}, {hi}]");
            assert_eq!(server.trace().entries().last().unwrap().m_prime, client.volume(lo, hi).unwrap());
            checked += 1;
        }
    }
    assert_eq!(checked, 1000);
}

#[test]
fn storage_is_buckets_times_capacity() {
    let (eps, beta) = (0.5, 2f64.powi(-20));
    let dp = DpParams::new(eps, beta).unwrap();
    let mut r = rng::stream(12);
    for (domain, n) in [(64u32, 300usize), (100, 1000), (256, 2000)] {
        let records = random_db(n, domain, &mut r);
        let params = RangeParams::new(domain, dp);
        let (client, server) = range::setup(&records, &params, &mut r).unwrap();
        let b = params.buckets;
        let mu_b = solve_bucket_offset(params.arity, domain as usize, dp.epsilon, beta)
            .unwrap()
            .padding() as usize;
        let expected = b * (n.div_ceil(b) + mu_b);
        assert_eq!(client.plan().storage(), expected);
        assert_eq!(server.len(), expected);
        assert_eq!(client.plan().buckets(), b);
    }
}

#[test]
fn buckets_are_uniform_on_the_server() {
    let dp = DpParams::new(1.0, 0.01).unwrap();
    let mut r = rng::stream(13);
    let records = random_db(200, 50, &mut r);
    let (client, mut server) = range::setup(&records, &RangeParams::new(50, dp), &mut r).unwrap();
    let len = server.ds1()[0].byte_len();
    assert!(server.ds1().iter().all(|c| c.byte_len() == len));
    let cap = client.plan().capacity;
    for j in 0..client.plan().buckets() {
        let (lo, hi) = client.plan().interval(j);
        client.query(&mut server, lo, hi).unwrap();
        assert_eq!(server.trace().entries().last().unwrap().indices.len(), cap);
    }
}

#[test]
fn server_view_ignores_payloads() {
    let dp = DpParams::new(0.5, 0.01).unwrap().with_noise(NoiseMode::Laplace);
    let mut r = rng::stream(14);
    let a = random_db(300, 80, &mut r);
    let b: Vec<Record> = a.iter().map(|x| Record::new(x.key, b"other payload".to_vec())).collect();
    let params = RangeParams::new(80, dp);
    let (ca, mut sa) = range::setup(&a, &params, &mut rng::stream(15)).unwrap();
    let (cb, mut sb) = range::setup(&b, &params, &mut rng::stream(15)).unwrap();
    assert_eq!(ca.plan(), cb.plan());
    assert_eq!(sa.ds2(), sb.ds2());
    assert_eq!(sa.ds1().len(), sb.ds1().len());
    for (lo, hi) in [(1, 80), (3, 9), (40, 40), (70, 80)] {
        ca.query(&mut sa, lo, hi).unwrap();
        cb.query(&mut sb, lo, hi).unwrap();
    }
    assert_eq!(sa.trace(), sb.trace());
}

#[test]
fn updates_are_refused() {
    let dp = DpParams::new(1.0, 0.01).unwrap();
    let (mut client, _) = range::setup(&[Record::new(1, vec![])], &RangeParams::new(8, dp), &mut rng::stream(0)).unwrap();
    let err = client.push_update(Update::Delete { old_key: 1 }).unwrap_err();
    assert!(matches!(err, Error::Unsupported(_)));
}
