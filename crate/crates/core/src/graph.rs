//! Hypergraph construction and incidence queries.
//!
//! Node ids are global: users occupy `0..M`, items `M..M+N`. Each triplet
//! `(i1, i2, j)` becomes one hyperedge `{i1, i2, j}`; plain interactions are
//! kept as pair edges outside the hyperedge set. Every adjacency list is
//! stored sorted in offsets + flat-array form.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw recommendation logs: user-item interactions and user-user-item
/// triplets over dense id spaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub num_users: usize,
    pub num_items: usize,
    pub interactions: Vec<(usize, usize)>,
    pub triplets: Vec<(usize, usize, usize)>,
}

impl Dataset {
    pub fn new(
        num_users: usize,
        num_items: usize,
        interactions: Vec<(usize, usize)>,
        triplets: Vec<(usize, usize, usize)>,
    ) -> Result<Self> {
        let dataset = Dataset { num_users, num_items, interactions, triplets };
        dataset.validate()?;
        Ok(dataset)
    }

    /// Checks id ranges, self-pairs and duplicates. Triplets are compared
    /// after canonicalizing the user pair to `(min, max)`.
    pub fn validate(&self) -> Result<()> {
        for (idx, &(u, i)) in self.interactions.iter().enumerate() {
            if u >= self.num_users || i >= self.num_items {
                return Err(Error::InvalidInput(format!(
                    "interaction #{idx} (user {u}, item {i}) is out of range for {} users / {} items",
                    self.num_users, self.num_items
                )));
            }
        }
        for (idx, &(u1, u2, i)) in self.triplets.iter().enumerate() {
            if u1 >= self.num_users || u2 >= self.num_users || i >= self.num_items {
                return Err(Error::InvalidInput(format!(
                    "triplet #{idx} (users {u1}, {u2}, item {i}) is out of range for {} users / {} items",
                    self.num_users, self.num_items
                )));
            }
            if u1 == u2 {
                return Err(Error::InvalidInput(format!(
                    "triplet #{idx} (users {u1}, {u2}, item {i}) pairs a user with itself"
                )));
            }
        }

        let mut seen = HashSet::with_capacity(self.interactions.len());
        let dup_pairs: Vec<_> = self.interactions.iter().filter(|p| !seen.insert(**p)).collect();
        let mut seen = HashSet::with_capacity(self.triplets.len());
        let dup_triplets: Vec<_> = self.triplets.iter().filter(|t| !seen.insert(canonical_triplet(**t))).collect();
        if dup_pairs.is_empty() && dup_triplets.is_empty() {
            return Ok(());
        }

        let mut msg = String::from("duplicate records:");
        for (u, i) in dup_pairs.iter().take(20) {
            let _ = write!(msg, " interaction ({u}, {i});");
        }
        for (u1, u2, i) in dup_triplets.iter().take(20) {
            let _ = write!(msg, " triplet ({u1}, {u2}, {i});");
        }
        let total = dup_pairs.len() + dup_triplets.len();
        if total > 40 {
            let _ = write!(msg, " ... {total} duplicates in total");
        }
        Err(Error::InvalidInput(msg))
    }

    /// Interaction lists per user, in record order.
    pub fn items_by_user(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.num_users];
        for &(u, i) in &self.interactions {
            lists[u].push(i);
        }
        lists
    }
}

pub(crate) fn canonical_triplet((u1, u2, i): (usize, usize, usize)) -> (usize, usize, usize) {
    (u1.min(u2), u1.max(u2), i)
}

/// Compressed adjacency: row `r` owns `indices[offsets[r]..offsets[r + 1]]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Csr {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl Csr {
    pub fn from_lists<I, L>(lists: I) -> Self
    where
        I: IntoIterator<Item = L>,
        L: AsRef<[usize]>,
    {
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        for list in lists {
            indices.extend_from_slice(list.as_ref());
            offsets.push(indices.len());
        }
        Csr { offsets, indices }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[usize] {
        &self.indices[self.offsets[r]..self.offsets[r + 1]]
    }

    /// Flat positions `[start, end)` of row `r` inside [`Csr::indices`].
    #[inline]
    pub fn span(&self, r: usize) -> std::ops::Range<usize> {
        self.offsets[r]..self.offsets[r + 1]
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Member lists of a hyperedge before id assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperedgeSpec {
    pub users: Vec<usize>,
    pub items: Vec<usize>,
}

/// Immutable hypergraph with every incidence index the propagation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    num_users: usize,
    num_items: usize,
    /// K(e): sorted global node ids of each hyperedge.
    members: Csr,
    /// Z(i) for users, rows indexed by user id.
    user_edges: Csr,
    /// Z(j) for items, rows indexed by item id.
    item_edges: Csr,
    /// N(i): sorted friends of each user.
    social: Csr,
    /// η(i, w) for every entry of `social`, aligned with its flat indices.
    social_relations: Vec<usize>,
    relation_pairs: Vec<(usize, usize)>,
    relation_index: HashMap<(usize, usize), usize>,
    /// N(i1, i2) per relation id.
    relation_edges: Csr,
    pair_edges: Vec<(usize, usize)>,
}

/// Builds the hypergraph for a dataset: one hyperedge per triplet, in
/// triplet order.
pub fn build_hypergraph(dataset: &Dataset) -> Result<Hypergraph> {
    dataset.validate()?;
    let specs: Vec<HyperedgeSpec> =
        dataset.triplets.iter().map(|&(u1, u2, i)| HyperedgeSpec { users: vec![u1, u2], items: vec![i] }).collect();
    Hypergraph::from_hyperedges(dataset.num_users, dataset.num_items, &specs, dataset.interactions.clone())
}

impl Hypergraph {
    /// General constructor for hyperedges of any degree. Each hyperedge needs
    /// at least two distinct users and one item; identical member sets are
    /// rejected as duplicates. Relation ids follow first encounter while
    /// scanning hyperedges in order and user pairs lexicographically.
    pub fn from_hyperedges(
        num_users: usize,
        num_items: usize,
        hyperedges: &[HyperedgeSpec],
        pair_edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let num_nodes = num_users + num_items;
        let mut member_lists = Vec::with_capacity(hyperedges.len());
        let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();

        for (e, spec) in hyperedges.iter().enumerate() {
            let mut users = spec.users.clone();
            users.sort_unstable();
            users.dedup();
            let mut items = spec.items.clone();
            items.sort_unstable();
            items.dedup();
            if users.len() < 2 || items.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "hyperedge #{e} needs at least 2 distinct users and 1 item, got users {:?} items {:?}",
                    spec.users, spec.items
                )));
            }
            if let Some(&u) = users.iter().find(|&&u| u >= num_users) {
                return Err(Error::InvalidInput(format!(
                    "hyperedge #{e} references user {u} but there are {num_users} users"
                )));
            }
            if let Some(&i) = items.iter().find(|&&i| i >= num_items) {
                return Err(Error::InvalidInput(format!(
                    "hyperedge #{e} references item {i} but there are {num_items} items"
                )));
            }
            let nodes: Vec<usize> = users.iter().copied().chain(items.iter().map(|&i| num_users + i)).collect();
            if let Some(first) = seen.insert(nodes.clone(), e) {
                return Err(Error::InvalidInput(format!(
                    "duplicate records: hyperedge #{e} repeats hyperedge #{first}"
                )));
            }
            member_lists.push(nodes);
        }

        let mut node_lists = vec![Vec::new(); num_nodes];
        for (e, nodes) in member_lists.iter().enumerate() {
            for &w in nodes {
                node_lists[w].push(e);
            }
        }

        let mut relation_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut relation_pairs = Vec::new();
        let mut relation_lists: Vec<Vec<usize>> = Vec::new();
        for (e, nodes) in member_lists.iter().enumerate() {
            let users: Vec<usize> = nodes.iter().copied().take_while(|&w| w < num_users).collect();
            for (a, &u1) in users.iter().enumerate() {
                for &u2 in &users[a + 1..] {
                    let t = *relation_index.entry((u1, u2)).or_insert_with(|| {
                        relation_pairs.push((u1, u2));
                        relation_lists.push(Vec::new());
                        relation_pairs.len() - 1
                    });
                    relation_lists[t].push(e);
                }
            }
        }

        let mut friends: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); num_users];
        for (t, &(u1, u2)) in relation_pairs.iter().enumerate() {
            friends[u1].insert(u2, t);
            friends[u2].insert(u1, t);
        }
        let social = Csr::from_lists(friends.iter().map(|m| m.keys().copied().collect::<Vec<_>>()));
        let social_relations = friends.iter().flat_map(|m| m.values().copied()).collect();

        let user_edges = Csr::from_lists(&node_lists[..num_users]);
        let item_edges = Csr::from_lists(&node_lists[num_users..]);

        Ok(Hypergraph {
            num_users,
            num_items,
            members: Csr::from_lists(member_lists),
            user_edges,
            item_edges,
            social,
            social_relations,
            relation_pairs,
            relation_index,
            relation_edges: Csr::from_lists(relation_lists),
            pair_edges,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn node_count(&self) -> usize {
        self.num_users + self.num_items
    }

    pub fn num_hyperedges(&self) -> usize {
        self.members.num_rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_pairs.len()
    }

    pub fn user_node(&self, user: usize) -> usize {
        user
    }

    pub fn item_node(&self, item: usize) -> usize {
        self.num_users + item
    }

    /// K(e).
    pub fn nodes_of(&self, e: usize) -> &[usize] {
        self.members.row(e)
    }

    /// Z(w) for a global node id.
    pub fn edges_of(&self, node: usize) -> &[usize] {
        if node < self.num_users {
            self.user_edges.row(node)
        } else {
            self.item_edges.row(node - self.num_users)
        }
    }

    /// N(i).
    pub fn neighbors(&self, user: usize) -> &[usize] {
        self.social.row(user)
    }

    /// N(i1, i2); empty when the users are not connected.
    pub fn shared_edges(&self, u1: usize, u2: usize) -> &[usize] {
        match self.relation_of(u1, u2) {
            Ok(t) => self.relation_edges.row(t),
            Err(_) => &[],
        }
    }

    /// η(i1, i2). Symmetric in its arguments.
    pub fn relation_of(&self, u1: usize, u2: usize) -> Result<usize> {
        self.relation_index
            .get(&(u1.min(u2), u1.max(u2)))
            .copied()
            .ok_or_else(|| Error::NotFound(format!("users {u1} and {u2} share no hyperedge")))
    }

    /// Canonical `(min, max)` user pair of relation `t`.
    pub fn relation_users(&self, t: usize) -> (usize, usize) {
        self.relation_pairs[t]
    }

    pub fn pair_edges(&self) -> &[(usize, usize)] {
        &self.pair_edges
    }

    pub fn members(&self) -> &Csr {
        &self.members
    }

    pub fn user_edges(&self) -> &Csr {
        &self.user_edges
    }

    pub fn item_edges(&self) -> &Csr {
        &self.item_edges
    }

    pub fn social(&self) -> &Csr {
        &self.social
    }

    /// Relation id of every directed `(i, w)` entry of [`Hypergraph::social`].
    pub fn social_relations(&self) -> &[usize] {
        &self.social_relations
    }

    pub fn relation_edges(&self) -> &Csr {
        &self.relation_edges
    }
}
