//! Compile a logical plan into a graph of map/reduce jobs.
//!
//! Chains of LOAD/FILTER/FOREACH fuse into the map phase of the shuffle job
//! they feed (or into one map-only job when they end at a STORE). Every
//! GROUP, JOIN and ORDER becomes exactly one shuffle job. A FOREACH that is
//! the sole consumer of a GROUP and touches the grouped bag only through
//! aggregate calls is fused into that job's reduce, which is also where
//! combiners attach.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data_model::Schema;
use crate::script_lang::{Builtin, Expr, GenItem, LogicalPlan, NodeId, PlanOp};

pub type DatasetId = String;

#[derive(Debug, Clone, PartialEq)]
pub enum MapOp {
    /// Parse a tab-separated line into a typed row.
    Decode { schema: Schema },
    Filter { predicate: Expr, schema: Schema },
    Generate {
        gens: Vec<GenItem>,
        in_schema: Schema,
        out_schema: Schema,
    },
}

impl MapOp {
    fn render(&self) -> String {
        match self {
            MapOp::Decode { .. } => "decode".to_string(),
            MapOp::Filter { predicate, .. } => format!("filter({})", predicate.render()),
            MapOp::Generate { gens, .. } => {
                let items: Vec<String> = gens
                    .iter()
                    .map(|g| match &g.rename {
                        Some(n) => format!("{} AS {}", g.expr.render(), n),
                        None => g.expr.render(),
                    })
                    .collect();
                format!("generate({})", items.join(", "))
            }
        }
    }

    pub fn out_schema(&self) -> &Schema {
        match self {
            MapOp::Decode { schema } => schema,
            MapOp::Filter { schema, .. } => schema,
            MapOp::Generate { out_schema, .. } => out_schema,
        }
    }
}

/// One input of a job: the dataset it reads, the fused per-record pipeline,
/// and for shuffle jobs the key fields (positions into the pipeline output)
/// plus a tag for join sides.
#[derive(Debug, Clone, PartialEq)]
pub struct JobInput {
    pub dataset: DatasetId,
    pub ops: Vec<MapOp>,
    pub key_positions: Vec<usize>,
    pub tag: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReduceOp {
    /// Map-only job.
    None,
    /// Emit `(group, bag-of-rows)` per key.
    GroupEmit { group_schema: Schema },
    /// Fused post-group FOREACH. When `combined` is set the mappers emit
    /// per-key partial tuples (one slot per entry of `aggs`) instead of raw
    /// rows, and the reduce merges partials.
    Aggregate {
        group_schema: Schema,
        gens: Vec<GenItem>,
        aggs: Vec<Builtin>,
        combined: bool,
    },
    /// Tagged equi-join: per key, cross product of left rows and right rows.
    JoinMerge,
    /// Emit rows in key order.
    OrderEmit { descending: bool },
}

impl ReduceOp {
    fn render(&self) -> String {
        match self {
            ReduceOp::None => "none".to_string(),
            ReduceOp::GroupEmit { .. } => "group-emit".to_string(),
            ReduceOp::Aggregate { gens, .. } => {
                let items: Vec<String> = gens
                    .iter()
                    .map(|g| match &g.rename {
                        Some(n) => format!("{} AS {}", g.expr.render(), n),
                        None => g.expr.render(),
                    })
                    .collect();
                format!("aggregate({})", items.join(", "))
            }
            ReduceOp::JoinMerge => "join-merge".to_string(),
            ReduceOp::OrderEmit { descending } => {
                if *descending {
                    "order-emit desc".to_string()
                } else {
                    "order-emit".to_string()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobSpec {
    pub job_id: usize,
    pub inputs: Vec<JobInput>,
    pub combiner: Option<Vec<Builtin>>,
    pub reduce: ReduceOp,
    /// Trailing fused pipeline applied to reduce output rows.
    pub post_ops: Vec<MapOp>,
    pub output: DatasetId,
    pub out_schema: Schema,
}

impl JobSpec {
    pub fn is_map_only(&self) -> bool {
        matches!(self.reduce, ReduceOp::None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetOrigin {
    Source { path: String },
    Job { job_id: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetInfo {
    pub schema: Schema,
    pub origin: DatasetOrigin,
}

/// Compiled job graph: jobs in execution order plus the dataset table and
/// the STORE bindings (dataset to declared output path).
#[derive(Debug, Clone, PartialEq)]
pub struct JobGraph {
    pub jobs: Vec<JobSpec>,
    pub datasets: BTreeMap<DatasetId, DatasetInfo>,
    pub stores: Vec<(DatasetId, String)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum CompileError {
    #[error("plan has no STORE statement, nothing to execute")]
    NoStore,
    #[error("plan is not schema-annotated, run schema inference first")]
    NotInferred,
}

fn dataset_hash(description: &str) -> DatasetId {
    let digest = Sha256::digest(description.as_bytes());
    let hex: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
    format!("ds-{hex}")
}

/// True when every reference to `bag` sits directly under an aggregate call,
/// which is what reduce-side aggregation (and combining) requires.
fn bag_only_in_aggregates(expr: &Expr, bag: &str) -> bool {
    match expr {
        Expr::FieldRef(name) => name != bag,
        Expr::ConstInt(_) | Expr::ConstFloat(_) | Expr::ConstText(_) => true,
        Expr::Binary(_, l, r) => bag_only_in_aggregates(l, bag) && bag_only_in_aggregates(r, bag),
        Expr::Call(b, args) if b.is_aggregate() => args
            .iter()
            .all(|a| matches!(a, Expr::FieldRef(n) if n == bag) || bag_only_in_aggregates(a, bag)),
        Expr::Call(_, args) => args.iter().all(|a| bag_only_in_aggregates(a, bag)),
    }
}

/// Collect the distinct aggregate functions applied directly to `bag`, in
/// first-appearance order; `None` if some aggregate takes a different
/// argument shape (those jobs stay uncombined).
fn direct_bag_aggregates(gens: &[GenItem], bag: &str) -> Option<Vec<Builtin>> {
    fn walk(expr: &Expr, bag: &str, out: &mut Vec<Builtin>) -> bool {
        match expr {
            Expr::Call(b, args) if b.is_aggregate() => {
                if args.len() == 1 && matches!(&args[0], Expr::FieldRef(n) if n == bag) {
                    if !out.contains(b) {
                        out.push(*b);
                    }
                    true
                } else {
                    false
                }
            }
            Expr::Binary(_, l, r) => walk(l, bag, out) && walk(r, bag, out),
            Expr::Call(_, args) => args.iter().all(|a| walk(a, bag, out)),
            _ => true,
        }
    }
    let mut out = Vec::new();
    for gen in gens {
        if !walk(&gen.expr, bag, &mut out) {
            return None;
        }
    }
    Some(out)
}

struct Compiler<'p> {
    plan: &'p LogicalPlan,
    consumers: Vec<usize>,
    /// Dataset each materialized node is available as.
    node_output: BTreeMap<NodeId, DatasetId>,
    jobs: Vec<JobSpec>,
    datasets: BTreeMap<DatasetId, DatasetInfo>,
    stores: Vec<(DatasetId, String)>,
}

impl<'p> Compiler<'p> {
    fn is_map_node(&self, id: NodeId) -> bool {
        matches!(
            self.plan.nodes[id].op,
            PlanOp::Filter { .. } | PlanOp::Foreach { .. }
        ) && !self.node_output.contains_key(&id)
    }

    /// Walk back from `from` through fusable map nodes to a materialized
    /// base; returns (base node, base dataset, base schema, map nodes in
    /// forward order).
    fn map_segment(&self, from: NodeId) -> (NodeId, DatasetId, Schema, Vec<NodeId>) {
        let mut chain = Vec::new();
        let mut cur = from;
        while self.is_map_node(cur) {
            chain.push(cur);
            cur = self.plan.nodes[cur].op.inputs()[0];
        }
        chain.reverse();
        let dataset = self.node_output[&cur].clone();
        let schema = self.plan.schema_of(cur).clone();
        (cur, dataset, schema, chain)
    }

    fn segment_ops(&self, base_schema: &Schema, chain: &[NodeId]) -> Vec<MapOp> {
        let mut ops = vec![MapOp::Decode {
            schema: base_schema.clone(),
        }];
        let mut cur_schema = base_schema.clone();
        for &id in chain {
            match &self.plan.nodes[id].op {
                PlanOp::Filter { predicate, .. } => ops.push(MapOp::Filter {
                    predicate: predicate.clone(),
                    schema: cur_schema.clone(),
                }),
                PlanOp::Foreach { gens, .. } => {
                    let out = self.plan.schema_of(id).clone();
                    ops.push(MapOp::Generate {
                        gens: gens.clone(),
                        in_schema: cur_schema.clone(),
                        out_schema: out.clone(),
                    });
                    cur_schema = out;
                }
                _ => unreachable!("segment contains only map nodes"),
            }
        }
        ops
    }

    fn shuffle_input(&self, from: NodeId, keys: &[String], tag: Option<usize>) -> JobInput {
        let (_, dataset, base_schema, chain) = self.map_segment(from);
        let ops = self.segment_ops(&base_schema, &chain);
        let final_schema = ops.last().map(|o| o.out_schema().clone()).unwrap();
        let key_positions = keys
            .iter()
            .map(|k| {
                final_schema
                    .position(k)
                    .expect("inference resolved shuffle keys")
            })
            .collect();
        JobInput {
            dataset,
            ops,
            key_positions,
            tag,
        }
    }

    fn push_job(
        &mut self,
        anchor: NodeId,
        inputs: Vec<JobInput>,
        reduce: ReduceOp,
        out_schema: Schema,
    ) -> usize {
        let job_id = self.jobs.len();
        let mut descr = format!("{reduce:?}|");
        for input in &inputs {
            descr.push_str(&input.dataset);
            for op in &input.ops {
                descr.push('|');
                descr.push_str(&op.render());
            }
            descr.push_str(&format!("|key={:?}|tag={:?};", input.key_positions, input.tag));
        }
        let output = dataset_hash(&descr);
        self.datasets.insert(
            output.clone(),
            DatasetInfo {
                schema: out_schema.clone(),
                origin: DatasetOrigin::Job { job_id },
            },
        );
        self.node_output.insert(anchor, output.clone());
        self.jobs.push(JobSpec {
            job_id,
            inputs,
            combiner: None,
            reduce,
            post_ops: Vec::new(),
            output,
            out_schema,
        });
        job_id
    }

    fn compile_shuffle_node(&mut self, id: NodeId) {
        let node = &self.plan.nodes[id];
        match &node.op {
            PlanOp::Group { input, keys } => {
                let group_schema = self.plan.schema_of(id).clone();
                // Fuse a sole consuming FOREACH that touches the bag only
                // through aggregates into the reduce.
                let consumer = self
                    .plan
                    .nodes
                    .iter()
                    .filter(|n| n.op.inputs().contains(&id))
                    .collect::<Vec<_>>();
                let bag_name = group_schema.fields()[1].name.clone();
                let fused = if self.consumers[id] == 1 {
                    match &consumer[0].op {
                        PlanOp::Foreach { gens, .. }
                            if gens
                                .iter()
                                .all(|g| bag_only_in_aggregates(&g.expr, &bag_name)) =>
                        {
                            Some((consumer[0].id, gens.clone()))
                        }
                        _ => None,
                    }
                } else {
                    None
                };
                let job_input = self.shuffle_input(*input, keys, None);
                match fused {
                    Some((foreach_id, gens)) => {
                        let out_schema = self.plan.schema_of(foreach_id).clone();
                        self.push_job(
                            foreach_id,
                            vec![job_input],
                            ReduceOp::Aggregate {
                                group_schema,
                                gens,
                                aggs: Vec::new(),
                                combined: false,
                            },
                            out_schema,
                        );
                    }
                    None => {
                        self.push_job(
                            id,
                            vec![job_input],
                            ReduceOp::GroupEmit {
                                group_schema: group_schema.clone(),
                            },
                            group_schema,
                        );
                    }
                }
            }
            PlanOp::Join {
                left,
                left_keys,
                right,
                right_keys,
            } => {
                let left_input = self.shuffle_input(*left, left_keys, Some(0));
                let right_input = self.shuffle_input(*right, right_keys, Some(1));
                let out_schema = self.plan.schema_of(id).clone();
                self.push_job(
                    id,
                    vec![left_input, right_input],
                    ReduceOp::JoinMerge,
                    out_schema,
                );
            }
            PlanOp::Order {
                input,
                keys,
                descending,
            } => {
                let job_input = self.shuffle_input(*input, keys, None);
                let out_schema = self.plan.schema_of(id).clone();
                self.push_job(
                    id,
                    vec![job_input],
                    ReduceOp::OrderEmit {
                        descending: *descending,
                    },
                    out_schema,
                );
            }
            _ => unreachable!("not a shuffle node"),
        }
    }

    fn compile_store(&mut self, store_id: NodeId) {
        let (input, path) = match &self.plan.nodes[store_id].op {
            PlanOp::Store { input, path } => (*input, path.clone()),
            _ => unreachable!(),
        };
        let (base, dataset, base_schema, chain) = self.map_segment(input);
        if chain.is_empty() {
            if let DatasetOrigin::Job { .. } = self.datasets[&dataset].origin {
                // shuffle output stored as-is
                self.stores.push((dataset, path));
                return;
            }
            // STORE straight after LOAD: identity map-only job
            let output = dataset_hash(&format!("copy|{dataset}|{path}"));
            let job_id = self.jobs.len();
            self.datasets.insert(
                output.clone(),
                DatasetInfo {
                    schema: base_schema.clone(),
                    origin: DatasetOrigin::Job { job_id },
                },
            );
            self.jobs.push(JobSpec {
                job_id,
                inputs: vec![JobInput {
                    dataset,
                    ops: vec![MapOp::Decode {
                        schema: base_schema.clone(),
                    }],
                    key_positions: Vec::new(),
                    tag: None,
                }],
                combiner: None,
                reduce: ReduceOp::None,
                post_ops: Vec::new(),
                output: output.clone(),
                out_schema: base_schema,
            });
            self.stores.push((output, path));
            return;
        }
        let out_schema = self.plan.schema_of(*chain.last().unwrap()).clone();
        // Fuse the trailing segment into the producing shuffle job when the
        // whole chain (and the job output itself) is exclusive to this
        // store; keeps linear plans at one job per shuffle.
        let producing_job = match self.datasets[&dataset].origin {
            DatasetOrigin::Job { job_id } => Some(job_id),
            DatasetOrigin::Source { .. } => None,
        };
        let exclusive = self.consumers[base] == 1 && chain.iter().all(|&n| self.consumers[n] == 1);
        if let Some(job_id) = producing_job {
            if exclusive && self.jobs[job_id].post_ops.is_empty() {
                let ops = self.segment_ops(&base_schema, &chain);
                // reduce output rows are already typed; drop the Decode
                self.jobs[job_id].post_ops = ops.into_iter().skip(1).collect();
                self.jobs[job_id].out_schema = out_schema.clone();
                let output = self.jobs[job_id].output.clone();
                if let Some(info) = self.datasets.get_mut(&output) {
                    info.schema = out_schema;
                }
                self.stores.push((output, path));
                return;
            }
        }
        // standalone map-only job
        let ops = self.segment_ops(&base_schema, &chain);
        let mut descr = format!("maponly|{dataset}");
        for op in &ops {
            descr.push('|');
            descr.push_str(&op.render());
        }
        let output = dataset_hash(&descr);
        let job_id = self.jobs.len();
        self.datasets.insert(
            output.clone(),
            DatasetInfo {
                schema: out_schema.clone(),
                origin: DatasetOrigin::Job { job_id },
            },
        );
        self.node_output.insert(*chain.last().unwrap(), output.clone());
        self.jobs.push(JobSpec {
            job_id,
            inputs: vec![JobInput {
                dataset,
                ops,
                key_positions: Vec::new(),
                tag: None,
            }],
            combiner: None,
            reduce: ReduceOp::None,
            post_ops: Vec::new(),
            output: output.clone(),
            out_schema,
        });
        self.stores.push((output, path));
    }
}

/// Compile an inferred plan into a job graph.
pub fn compile(plan: &LogicalPlan) -> Result<JobGraph, CompileError> {
    if plan.nodes.iter().any(|n| n.schema.is_none()) {
        return Err(CompileError::NotInferred);
    }
    if plan.stores().next().is_none() {
        return Err(CompileError::NoStore);
    }
    let mut consumers = vec![0usize; plan.nodes.len()];
    for node in &plan.nodes {
        for input in node.op.inputs() {
            consumers[input] += 1;
        }
    }
    let mut compiler = Compiler {
        plan,
        consumers,
        node_output: BTreeMap::new(),
        jobs: Vec::new(),
        datasets: BTreeMap::new(),
        stores: Vec::new(),
    };
    // seed load datasets
    for node in &plan.nodes {
        if let PlanOp::Load { path, schema } = &node.op {
            let id = format!("src:{path}");
            compiler.datasets.insert(
                id.clone(),
                DatasetInfo {
                    schema: schema.clone(),
                    origin: DatasetOrigin::Source { path: path.clone() },
                },
            );
            compiler.node_output.insert(node.id, id);
        }
    }
    for node in &plan.nodes {
        if matches!(
            node.op,
            PlanOp::Group { .. } | PlanOp::Join { .. } | PlanOp::Order { .. }
        ) {
            compiler.compile_shuffle_node(node.id);
        }
    }
    for node in &plan.nodes {
        if matches!(node.op, PlanOp::Store { .. }) {
            compiler.compile_store(node.id);
        }
    }
    Ok(JobGraph {
        jobs: compiler.jobs,
        datasets: compiler.datasets,
        stores: compiler.stores,
    })
}

/// Attach combiners to aggregate jobs whose calls all apply directly to the
/// grouped bag. COUNT combines as a sum of partial counts; AVG is carried as
/// (sum, count) pairs and finalized at reduce. Outputs are unchanged.
pub fn insert_combiners(mut graph: JobGraph) -> JobGraph {
    for job in &mut graph.jobs {
        if let ReduceOp::Aggregate {
            group_schema,
            gens,
            aggs,
            combined,
        } = &mut job.reduce
        {
            let bag_name = group_schema.fields()[1].name.clone();
            if let Some(funcs) = direct_bag_aggregates(gens, &bag_name) {
                if !funcs.is_empty() {
                    *aggs = funcs.clone();
                    *combined = true;
                    job.combiner = Some(funcs);
                }
            }
        }
    }
    graph
}

/// Display name for a dataset: sources by path, job outputs as tmpN.
pub fn dataset_display(graph: &JobGraph, id: &DatasetId) -> String {
    match graph.datasets.get(id) {
        Some(DatasetInfo {
            origin: DatasetOrigin::Source { path },
            ..
        }) => path.clone(),
        Some(DatasetInfo {
            origin: DatasetOrigin::Job { job_id },
            ..
        }) => format!("tmp{job_id}"),
        None => id.clone(),
    }
}

/// Stable one-line-per-job rendering of a graph.
pub fn explain(graph: &JobGraph) -> String {
    let mut out = String::new();
    for job in &graph.jobs {
        let kind = match &job.reduce {
            ReduceOp::None => "map-only".to_string(),
            ReduceOp::GroupEmit { .. } => "shuffle(group)".to_string(),
            ReduceOp::Aggregate { .. } => "shuffle(group)".to_string(),
            ReduceOp::JoinMerge => "shuffle(join)".to_string(),
            ReduceOp::OrderEmit { .. } => "shuffle(order)".to_string(),
        };
        let inputs: Vec<String> = job
            .inputs
            .iter()
            .map(|input| {
                let mut ops: Vec<String> = input.ops.iter().map(|o| o.render()).collect();
                if let Some(tag) = input.tag {
                    ops.push(format!("tag({tag})"));
                }
                if !input.key_positions.is_empty() {
                    let schema = input.ops.last().unwrap().out_schema();
                    let keys: Vec<&str> = input
                        .key_positions
                        .iter()
                        .map(|&p| schema.fields()[p].name.as_str())
                        .collect();
                    ops.push(format!("key({})", keys.join(", ")));
                }
                format!(
                    "{}: {}",
                    dataset_display(graph, &input.dataset),
                    ops.join(", ")
                )
            })
            .collect();
        let mut line = format!(
            "job {}: {} inputs=[{}] reduce={}",
            job.job_id,
            kind,
            inputs.join(" | "),
            job.reduce.render()
        );
        if let Some(combiner) = &job.combiner {
            let names: Vec<&str> = combiner.iter().map(|b| b.name()).collect();
            line.push_str(&format!(" combiner=[{}]", names.join(", ")));
        }
        if !job.post_ops.is_empty() {
            let ops: Vec<String> = job.post_ops.iter().map(|o| o.render()).collect();
            line.push_str(&format!(" post=[{}]", ops.join(", ")));
        }
        line.push_str(&format!(" output={}", dataset_display(graph, &job.output)));
        out.push_str(&line);
        out.push('\n');
    }
    for (dataset, path) in &graph.stores {
        out.push_str(&format!(
            "store: {} -> '{}'\n",
            dataset_display(graph, dataset),
            path
        ));
    }
    out
}
