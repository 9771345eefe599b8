use drew::format;
use drew::DrewError;
use drew_core::ecc::construct_code;
use drew_core::rng::substream;
use drew_core::store::Store;
use rand::Rng;

fn random_csv(rows: usize, d: usize) -> String {
    let mut rng = substream(1, "test/csv", 0);
    let mut s = String::from("id");
    for j in 0..d {
        s.push_str(&format!(",v{j}"));
    }
    s.push('\n');
    for i in 0..rows {
        s.push_str(&(i as u64 * 7 + 1).to_string());
        for _ in 0..d {
            s.push_str(&format!(",{}", rng.gen_range(-5.0f64..5.0)));
        }
        s.push('\n');
    }
    s
}

#[test]
fn csv_roundtrip_of_1000_rows() {
    let text = random_csv(1000, 12);
    let store = drew::csv_io::import(text.as_bytes()).unwrap();
    assert_eq!(store.len(), 1000);

    let mut out = Vec::new();
    drew::csv_io::export(&store, &mut out).unwrap();
    let exported = String::from_utf8(out).unwrap();
    // independent oracle: plain line and field counting
    let lines: Vec<&str> = exported.lines().collect();
    assert_eq!(lines.len(), 1001);
    assert!(lines.iter().all(|l| l.split(',').count() == 13));
    for (line, i) in lines[1..].iter().zip(0u64..) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0].parse::<u64>().unwrap(), i * 7 + 1);
        let v: Vec<f32> = fields[1..].iter().map(|x| x.parse().unwrap()).collect();
        assert_eq!(v.as_slice(), store.embedding(i as usize));
    }

    let again = drew::csv_io::import(exported.as_bytes()).unwrap();
    assert_eq!(again.ids(), store.ids());
    for i in 0..store.len() {
        for (a, b) in again.embedding(i).iter().zip(store.embedding(i)) {
            assert!((a - b).abs() <= 1e-6);
        }
    }
}

#[test]
fn csv_header_is_required() {
    for bad in [
        "1,2,3\n4,5,6\n",
        "id,v1\n1,2\n",
        "key,v0\n1,2\n",
        "id\n1\n",
        "id,v0\nx,1\n",
        "id,v0\n1,\n",
    ] {
        assert!(drew::csv_io::import(bad.as_bytes()).is_err(), "{bad:?}");
    }
    assert!(drew::csv_io::import("id,v0\n1,0\n".as_bytes()).is_err());
    assert!(drew::csv_io::import("id,v0\n1,1\n1,2\n".as_bytes()).is_err());
}

#[test]
fn store_file_roundtrip_and_dimension_check() {
    let dir = tempfile::tempdir().unwrap();
    let spec = construct_code(10, 100, 0.1).unwrap();
    let raw = drew::csv_io::import(random_csv(300, 16).as_bytes()).unwrap();
    let store = raw.assign_clusters(10, 5, &spec).unwrap();
    let path = dir.path().join("s.drew");
    format::save(&store, &path).unwrap();
    let back: Store = format::load(&path).unwrap();
    assert_eq!(back, store);
    assert!(matches!(
        format::load_with_dim(&path, 32),
        Err(DrewError::Dimension {
            expected: 32,
            found: 16
        })
    ));
    assert!(format::load_with_dim(&path, 16).is_ok());

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(format::load(&path).is_err());
}
