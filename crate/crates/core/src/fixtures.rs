use crate::catalog::Catalog;

pub(crate) fn two_clip_catalog() -> Catalog {
    Catalog::from_json(
        br#"{"rooms":[{"room_id":"r","name":"Room","walls":["w"]}],
            "walls":[{"wall_id":"w","room_id":"r","image_ref":"w.png","width_px":400,"height_px":300,
              "targets":[{"target_id":"t1","clip_id":"c1","polygon":[[10,10],[90,10],[90,90],[10,90]]},
                         {"target_id":"t2","clip_id":"c2","polygon":[[110,10],[190,10],[190,90],[110,90]]},
                         {"target_id":"t7","clip_id":"c7","polygon":[[210,10],[290,10],[290,90],[210,90]]},
                         {"target_id":"ts","clip_id":"story","polygon":[[10,110],[90,110],[90,190],[10,190]]}]}],
            "clips":[{"clip_id":"c1","duration_ms":10000,"title":"One"},
                     {"clip_id":"c2","duration_ms":27000,"title":"Two"},
                     {"clip_id":"c7","duration_ms":8000,"title":"Seven"},
                     {"clip_id":"story","duration_ms":59000,"title":"Story"}]}"#,
    )
    .unwrap()
}
