mod common;

use common::{brute_edges, brute_owner, random_points, rng};
use gpcov::geometry::compute_partition;
use gpcov::{Domain, Point};
use proptest::prelude::*;

fn positions_strategy(domain: Domain, max_agents: usize) -> impl Strategy<Value = Vec<Point>> {
    let (w, h) = (domain.world_width(), domain.world_height());
    prop::collection::vec((0.0..=w, 0.0..=h).prop_map(|(x, y)| Point::new(x, y)), 1..=max_agents)
}

#[test]
fn matches_brute_force_on_seeded_configurations() {
    let domain = Domain::new(96, 54).unwrap();
    for seed in 0..25 {
        let mut r = rng(seed);
        let n = 2 + (seed as usize % 7);
        let pos = random_points(&mut r, n, &domain);
        let part = compute_partition(&pos, &domain).unwrap();
        let owner = brute_owner(&pos, &domain);
        assert_eq!(part.owner, owner, "seed {seed}");
        let edges: Vec<_> = brute_edges(&owner, &domain, n).into_iter().collect();
        assert_eq!(part.edges(), edges, "seed {seed}");
    }
}

#[test]
fn four_corner_agents_form_a_cycle() {
    let domain = Domain::new(96, 54).unwrap();
    let pos = [Point::new(10.0, 10.0), Point::new(86.0, 10.0), Point::new(10.0, 44.0), Point::new(86.0, 44.0)];
    let part = compute_partition(&pos, &domain).unwrap();
    assert_eq!(part.edges(), vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
    for i in 0..4 {
        assert_eq!(part.laplacian.degree(i), 2);
        assert_eq!(part.cells[i].len(), 48 * 27);
    }
}

#[test]
fn coincident_agents_leave_the_later_one_empty() {
    let domain = Domain::new(20, 10).unwrap();
    let pos = [Point::new(5.0, 5.0), Point::new(5.0, 5.0), Point::new(15.0, 5.0)];
    let part = compute_partition(&pos, &domain).unwrap();
    assert!(part.cells[1].is_empty());
    assert!(part.neighbors[1].is_empty());
    assert_eq!(part.edges(), vec![(0, 2)]);
}

#[test]
fn scaled_cells_use_world_coordinates() {
    let domain = Domain::with_cell_size(10, 10, 2.0).unwrap();
    let pos = [Point::new(1.0, 10.0), Point::new(19.0, 10.0)];
    let part = compute_partition(&pos, &domain).unwrap();
    assert_eq!(part.cells[0].len(), 50);
    assert_eq!(part.cell(0).area(), 200.0);
    assert_eq!(part.owner, brute_owner(&pos, &domain));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_pixel_goes_to_a_nearest_agent(pos in positions_strategy(Domain::new(40, 24).unwrap(), 8)) {
        let domain = Domain::new(40, 24).unwrap();
        let part = compute_partition(&pos, &domain).unwrap();
        for (idx, &o) in part.owner.iter().enumerate() {
            let q = domain.center(idx);
            let d = (q - pos[o]).norm_squared();
            for (j, p) in pos.iter().enumerate() {
                let dj = (q - p).norm_squared();
                prop_assert!(d <= dj);
                if j < o {
                    prop_assert!(dj > d);
                }
            }
        }
        let total: usize = part.cells.iter().map(Vec::len).sum();
        prop_assert_eq!(total, domain.num_pixels());
    }

    #[test]
    fn neighbor_graph_and_laplacian_are_consistent(pos in positions_strategy(Domain::new(40, 24).unwrap(), 8)) {
        let domain = Domain::new(40, 24).unwrap();
        let part = compute_partition(&pos, &domain).unwrap();
        let n = pos.len();
        let l = part.laplacian.matrix();
        for i in 0..n {
            prop_assert!(!part.neighbors[i].contains(&i));
            for &j in &part.neighbors[i] {
                prop_assert!(part.neighbors[j].contains(&i));
            }
            prop_assert_eq!(l.row(i).iter().sum::<i64>(), 0);
            prop_assert_eq!(l[(i, i)], part.neighbors[i].len() as i64);
            for j in 0..n {
                prop_assert_eq!(l[(i, j)], l[(j, i)]);
                if i != j {
                    prop_assert!(l[(i, j)] == 0 || l[(i, j)] == -1);
                }
            }
        }
    }

    #[test]
    fn partition_is_deterministic(pos in positions_strategy(Domain::new(30, 20).unwrap(), 6)) {
        let domain = Domain::new(30, 20).unwrap();
        prop_assert_eq!(compute_partition(&pos, &domain).unwrap(), compute_partition(&pos, &domain).unwrap());
    }
}
