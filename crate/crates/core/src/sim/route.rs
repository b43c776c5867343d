use super::lattice::Lattice;
use crate::error::{Error, Result};

const NEIGHBOURS: [(i64, i64); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Bucket-brigade path: from each node, step to whichever of the 8 surrounding
/// nodes is closest to the destination (ties to the lowest node index).
/// The returned path includes both endpoints.
pub fn route_greedy(lattice: &Lattice, origin: usize, destination: usize) -> Result<Vec<usize>> {
    if origin == destination {
        return Err(Error::SelfRoute(origin));
    }
    let start_sq = lattice.steps_sq(origin, destination);
    let budget = ((2.0 * (start_sq as f64).sqrt()).ceil() as usize).max(1);
    let mut path = vec![origin];
    let mut current = origin;
    while current != destination {
        if path.len() > budget {
            return Err(Error::HopBudgetExceeded {
                origin,
                destination,
                budget,
            });
        }
        let (next, _) = NEIGHBOURS
            .iter()
            .map(|&(dx, dy)| {
                let m = lattice.shift(current, dx, dy);
                (m, lattice.steps_sq(m, destination))
            })
            .min_by_key(|&(m, sq)| (sq, m))
            .expect("eight neighbours");
        path.push(next);
        current = next;
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn lattice() -> Lattice {
        Lattice::build(40, &ModelParams::default()).unwrap()
    }

    #[test]
    fn straight_row() {
        let lat = lattice();
        let path = route_greedy(&lat, 0, lat.index(0, 3)).unwrap();
        assert_eq!(path, vec![0, 1, 2, 3]);
        assert_eq!(path.len() - 2, 2);
    }

    #[test]
    fn diagonal() {
        let lat = lattice();
        let path = route_greedy(&lat, 0, lat.index(2, 2)).unwrap();
        assert_eq!(path, vec![0, lat.index(1, 1), lat.index(2, 2)]);
    }

    #[test]
    fn knight_move() {
        // Candidates from (0,0) and their squared distance to (1,2):
        // (1,1) -> 1, (0,1) -> 2, (1,0) -> 4; every other neighbour is farther.
        let lat = lattice();
        let path = route_greedy(&lat, 0, lat.index(1, 2)).unwrap();
        assert_eq!(path, vec![0, lat.index(1, 1), lat.index(1, 2)]);
    }

    #[test]
    fn wraps_across_the_seam() {
        let lat = lattice();
        let dest = lat.index(0, 38);
        let path = route_greedy(&lat, 0, dest).unwrap();
        assert_eq!(path, vec![0, lat.index(0, 39), dest]);
    }

    #[test]
    fn self_route_is_an_error() {
        assert!(matches!(
            route_greedy(&lattice(), 5, 5),
            Err(Error::SelfRoute(5))
        ));
    }

    #[test]
    fn hop_count_is_chebyshev_for_every_reachable_offset() {
        let lat = lattice();
        let origin = lat.index(20, 20);
        for off in lat.reachable_offsets() {
            let dest = lat.shift(origin, off.dx, off.dy);
            let path = route_greedy(&lat, origin, dest).unwrap();
            assert_eq!(path.len() - 1, off.dx.abs().max(off.dy.abs()) as usize);
            let mut seen = path.clone();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), path.len());
        }
    }
}
