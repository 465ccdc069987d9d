use chrono::{Days, NaiveDate, NaiveDateTime, NaiveTime};
use pricewise_core::features::{
    assemble_feature_matrix, attach_sort_rank, build_engineered_features, build_observed_features,
    train_product_embeddings, EmbeddingConfig, EmbeddingTable,
};
use pricewise_core::ingest::Dataset;
use pricewise_core::{
    CatalogEntry, ClickstreamEvent, DemandObservation, EventType, Gender, Money, ProductId, SortRankRecord,
};

fn day(n: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 5, 1).unwrap() + Days::new(n)
}

fn at(n: u64, hour: u32) -> NaiveDateTime {
    day(n).and_time(NaiveTime::from_hms_opt(hour, 0, 0).unwrap())
}

fn entry(id: &str, brand: &str) -> CatalogEntry {
    CatalogEntry {
        product_id: id.into(),
        brand: brand.into(),
        article_type: "tops".into(),
        gender: Gender::Women,
        mrp: Money::from_rupees(1000),
        buying_cost: Money::from_rupees(400),
        base_discount_pct: 20.0,
        color: "red".into(),
    }
}

fn event(user: &str, id: &str, kind: EventType, n: u64, hour: u32) -> ClickstreamEvent {
    ClickstreamEvent {
        user_id: user.into(),
        product_id: id.into(),
        event_type: kind,
        timestamp: at(n, hour),
    }
}

/// A and B share a BAG group selling 3 and 1 a day; C sits alone selling 1 a day.
fn fixture() -> Dataset {
    let sales = [("A", 3), ("B", 1), ("C", 1)];
    let mut price_history = Vec::new();
    for (id, q) in sales {
        for n in 0..10 {
            price_history.push(DemandObservation {
                product_id: id.into(),
                date: day(n),
                price: Money::from_rupees(800),
                discount_pct: 20.0,
                quantity_sold: q,
                inventory: 30,
            });
        }
    }
    let mut clickstream = vec![
        event("u1", "A", EventType::Cart, 8, 9),
        event("u1", "A", EventType::Cart, 8, 10),
        event("u2", "A", EventType::Cart, 8, 11),
        event("u2", "A", EventType::List, 8, 12),
        event("u2", "A", EventType::Pdp, 8, 13),
        event("u3", "B", EventType::List, 8, 9),
        event("u3", "B", EventType::List, 8, 10),
        event("u3", "B", EventType::Order, 8, 11),
    ];
    for u in 0..30 {
        let user = format!("w{u}");
        clickstream.push(event(&user, "A", EventType::Pdp, 3, 8));
        clickstream.push(event(&user, "B", EventType::Click, 3, 9));
        clickstream.push(event(&user, "C", EventType::Pdp, 3, 10));
    }
    let mut d = Dataset {
        catalog: vec![entry("A", "anouk"), entry("B", "anouk"), entry("C", "sangria")],
        price_history,
        clickstream,
        sort_ranks: vec![
            SortRankRecord {
                product_id: "A".into(),
                rank: 1,
                score: 0.75,
            },
            SortRankRecord {
                product_id: "B".into(),
                rank: 2,
                score: 0.5,
            },
        ],
        as_of: day(10),
    };
    d.normalize();
    d
}

fn embeddings(d: &Dataset) -> EmbeddingTable {
    let config = EmbeddingConfig {
        epochs: 2,
        ..EmbeddingConfig::default()
    };
    train_product_embeddings(&d.clickstream, &config).unwrap()
}

#[test]
fn observed_counts_by_event_type() {
    let d = fixture();
    let obs = build_observed_features(&d, day(8)).unwrap();
    let a = &obs[&ProductId::from("A")];
    assert_eq!(a.cart_count, 3.0);
    assert_eq!((a.list_count, a.pdp_count), (1.0, 1.0));
    assert_eq!((a.quantity_sold, a.inventory), (3.0, 30.0));
    let b = &obs[&ProductId::from("B")];
    assert_eq!((b.list_count, b.pdp_count, b.cart_count), (2.0, 0.0, 0.0));
    let c = &obs[&ProductId::from("C")];
    assert_eq!((c.list_count, c.pdp_count, c.cart_count), (0.0, 0.0, 0.0));
    assert!(build_observed_features(&d, day(10)).is_err());
}

#[test]
fn engineered_window_and_bag_ratio() {
    let d = fixture();
    let eng = build_engineered_features(&d, day(9)).unwrap();
    let c = &eng[&ProductId::from("C")];
    assert_eq!(c.sales_7d, 7.0);
    assert_eq!(c.bag_ratio, 1.0);
    assert_eq!(eng[&ProductId::from("A")].bag_ratio, 0.75);
    assert_eq!(eng[&ProductId::from("B")].bag_ratio, 0.25);
    // window [day 2, day 8] holds 30 pdp views of A on day 3 plus day 8's list and pdp
    assert_eq!(eng[&ProductId::from("A")].visibility_7d, 32.0);
    assert!(build_engineered_features(&d, day(5)).is_err());
}

#[test]
fn sort_scores_pass_through() {
    let mut d = fixture();
    let scores = attach_sort_rank(&d).unwrap();
    assert_eq!(scores[&ProductId::from("A")], 0.75);
    assert_eq!(scores[&ProductId::from("C")], 0.0);
    d.sort_ranks.push(SortRankRecord {
        product_id: "A".into(),
        rank: 3,
        score: 0.1,
    });
    let err = attach_sort_rank(&d).unwrap_err().to_string();
    assert!(err.contains("duplicate rank row"), "{err}");
}

#[test]
fn matrix_shape_and_labels() {
    let d = fixture();
    let emb = embeddings(&d);
    let m = assemble_feature_matrix(&d, day(9), &emb).unwrap();
    assert_eq!(m.n_rows(), 3);
    assert_eq!(m.n_cols(), 5 + 10 + 1 + 16);
    assert_eq!(m.columns.len(), 32);
    assert_eq!(m.labels, vec![3.0, 1.0, 1.0]);
    assert!(m.rows.iter().all(|r| r.values().len() == 32));
    assert_eq!(m.dense().len(), 96);
    assert_eq!(m, assemble_feature_matrix(&d, day(9), &emb).unwrap());

    let empty = EmbeddingTable {
        vectors: Default::default(),
        ..emb
    };
    let err = assemble_feature_matrix(&d, day(9), &empty)
        .unwrap_err()
        .to_string();
    assert!(err.contains("missing embeddings"), "{err}");
}

#[test]
fn matrix_csv_has_header_and_rows() {
    let d = fixture();
    let m = assemble_feature_matrix(&d, day(9), &embeddings(&d)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("features.csv");
    m.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().count(), 4);
}
