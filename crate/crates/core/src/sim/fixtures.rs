//! Small hand-built models with matching logs.

use super::builder::ModelBuilder;
use crate::graph::{AppModel, NodeId};
use crate::log::{CallStackInfo, Des, LogRecord, LogSequence};

/// Runtime frames below the app callback (looper, dispatch, ...).
pub const BASE_DEPTH: u32 = 7;

pub const INVOKE: &str =
    "java.lang.reflect.Method.invoke(Ljava/lang/Object;[Ljava/lang/Object;)Ljava/lang/Object;";
pub const GET_DEVICE_ID: &str = "android.telephony.TelephonyManager.getDeviceId()Ljava/lang/String;";
pub const EXECUTE: &str = "org.apache.http.client.HttpClient.execute(Lorg/apache/http/client/methods/HttpUriRequest;)Lorg/apache/http/HttpResponse;";
pub const SEND_TEXT: &str = "android.telephony.SmsManager.sendTextMessage(Ljava/lang/String;Ljava/lang/String;Ljava/lang/String;Landroid/app/PendingIntent;Landroid/app/PendingIntent;)V";
pub const START_ACTIVITY: &str = "android.app.Activity.startActivity(Landroid/content/Intent;)V";

/// A record logged by `api` with caller chain `chain` (callback first).
pub fn record(seq: u64, api: &str, chain: &[&str], k: usize) -> LogRecord {
    let frames: Vec<_> = chain.iter().map(|c| c.parse().expect("signature")).collect();
    let start = frames.len().saturating_sub(k);
    LogRecord {
        seq,
        pid: 1000,
        tid: 1,
        des: Des::plain(api.parse().expect("signature")),
        csi: CallStackInfo {
            p: frames[start..].to_vec(),
            d: BASE_DEPTH + chain.len() as u32,
        },
    }
}

/// The callback record for `callback`.
pub fn callback_record(seq: u64, callback: &str) -> LogRecord {
    record(seq, callback, &[callback], usize::MAX)
}

/// A model, a log over it and the nodes its body records were emitted at.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub model: AppModel,
    pub log: LogSequence,
    pub logged_nodes: Vec<NodeId>,
    /// Node ids in creation order, so `ids[i]` is the fixture's `v{i+1}`.
    pub ids: Vec<NodeId>,
}

pub const MAIN_ON_CREATE: &str = "com.example.app.MainActivity.onCreate(Landroid/os/Bundle;)V";
pub const UTIL_GET_ID: &str = "com.example.app.Util.getId()Ljava/lang/String;";

/// Fifteen-node graph v1..v15: an obfuscated reflective lookup, a helper
/// reading the device id, a string-length check guarding a network call.
/// Logged nodes are v2, v5, v10 and v14.
pub fn motivating_example() -> Fixture {
    const K: usize = 11;
    let cb = MAIN_ON_CREATE;
    let util = UTIL_GET_ID;
    let mut mb = ModelBuilder::new();
    mb.logged(INVOKE).logged(GET_DEVICE_ID).logged(EXECUTE);
    let mut g = mb.supergraph(cb);
    let v1 = g.entry(cb);
    let v2 = g.call_framework(cb, INVOKE, "Object tm = getSystem.invoke(ctx, decrypt(\"cGhvbmU=\"))");
    let v3 = g.call_app(cb, util);
    let v4 = g.entry(util);
    let v5 = g.call_framework(util, GET_DEVICE_ID, "String id = tm.getDeviceId()");
    let v6 = g.plain(util, "return id");
    let v7 = g.exit(util);
    let v8 = g.branch(cb, "if (id == null)");
    let v9 = g.plain(cb, "Log.w(TAG, \"no id\")");
    let v10 = g.call_framework(cb, INVOKE, "int len = (Integer) length.invoke(id)");
    let v11 = g.branch(cb, "if (len > 10)");
    let v12 = g.plain(cb, "HttpPost post = new HttpPost(url + id)");
    let v13 = g.plain(cb, "HttpClient client = new DefaultHttpClient()");
    let v14 = g.call_framework(cb, EXECUTE, "client.execute(post)");
    let v15 = g.exit(cb);
    g.chain(&[v1, v2, v3, v8, v10, v11, v12, v13, v14, v15])
        .chain(&[v4, v5, v6, v7])
        .chain(&[v8, v9, v15])
        .flow(v11, v15);
    g.finish();
    let model = mb.build();
    let log = LogSequence::new(
        vec![
            callback_record(1, cb),
            record(2, INVOKE, &[cb], K),
            record(3, GET_DEVICE_ID, &[cb, util], K),
            record(4, INVOKE, &[cb], K),
            record(5, EXECUTE, &[cb], K),
        ],
        K,
    );
    Fixture {
        model,
        log,
        logged_nodes: vec![v2, v5, v10, v14],
        ids: vec![v1, v2, v3, v4, v5, v6, v7, v8, v9, v10, v11, v12, v13, v14, v15],
    }
}

pub const CLICK: &str = "com.example.app.MainActivity.onClick(Landroid/view/View;)V";
pub const HIDDEN: &str = "com.example.app.Hidden.leak()V";
pub const SECOND_ON_CREATE: &str = "com.example.app.SecondActivity.onCreate(Landroid/os/Bundle;)V";
pub const THIRD_ON_CREATE: &str = "com.example.app.ThirdActivity.onCreate(Landroid/os/Bundle;)V";

/// Reflective dispatch and an inter-component call. `ids` holds, in
/// order: click entry, reflective site, icc site, click exit, hidden
/// entry, hidden call, hidden exit, second entry, third entry.
pub fn dispatch_example() -> Fixture {
    let mut mb = ModelBuilder::new();
    mb.logged(INVOKE)
        .logged(GET_DEVICE_ID)
        .logged(SEND_TEXT)
        .logged(START_ACTIVITY);
    let mut second = mb.supergraph(SECOND_ON_CREATE);
    let s_entry = second.entry(SECOND_ON_CREATE);
    let s_exit = second.exit(SECOND_ON_CREATE);
    second.flow(s_entry, s_exit);
    second.finish();
    let mut third = mb.supergraph(THIRD_ON_CREATE);
    let t_entry = third.entry(THIRD_ON_CREATE);
    let t_exit = third.exit(THIRD_ON_CREATE);
    third.flow(t_entry, t_exit);
    third.finish();
    let mut g = mb.supergraph(CLICK);
    let e = g.entry(CLICK);
    let r = g.reflective(CLICK, INVOKE, "m.invoke(target, args)");
    let i = g.icc(CLICK, START_ACTIVITY, "startActivity(intent)");
    let x = g.exit(CLICK);
    let he = g.entry(HIDDEN);
    let hc = g.call_framework(HIDDEN, GET_DEVICE_ID, "tm.getDeviceId()");
    let hx = g.exit(HIDDEN);
    g.chain(&[e, r, i, x]).chain(&[he, hc, hx]);
    g.icc_target(i, s_entry).icc_target(i, t_entry);
    g.finish();
    Fixture {
        model: mb.build(),
        log: LogSequence::new(Vec::new(), 11),
        logged_nodes: Vec::new(),
        ids: vec![e, r, i, x, he, hc, hx, s_entry, t_entry],
    }
}

/// Per-depth counts of a call-depth fixture whose coverage reaches 0.9788
/// at k = 11.
pub const REFERENCE_DEPTH_COUNTS: [usize; 16] =
    [750, 250, 200, 175, 175, 150, 150, 125, 125, 150, 197, 15, 12, 10, 8, 8];

/// One callback calling a chain of methods; the method at depth `d`
/// (callback = 1) holds `counts[d - 1]` calls of a logged API.
pub fn depth_fixture(counts: &[usize]) -> AppModel {
    let level = |d: usize| {
        if d == 1 {
            MAIN_ON_CREATE.to_string()
        } else {
            format!("com.example.depth.Level{d}.run()V")
        }
    };
    let mut mb = ModelBuilder::new();
    mb.logged(GET_DEVICE_ID);
    let mut g = mb.supergraph(MAIN_ON_CREATE);
    for d in 1..=counts.len() {
        let m = level(d);
        let mut ids = vec![g.entry(&m)];
        for _ in 0..counts[d - 1] {
            ids.push(g.call_framework(&m, GET_DEVICE_ID, "tm.getDeviceId()"));
        }
        if d < counts.len() {
            ids.push(g.call_app(&m, &level(d + 1)));
        }
        ids.push(g.exit(&m));
        g.chain(&ids);
    }
    g.finish();
    mb.build()
}
