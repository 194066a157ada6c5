#include "caris/gateway/console.hpp"

namespace caris::gateway {

namespace {

const char* const kPage = R"HTML(<!doctype html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>CARIS wizard console</title>
<style>
  body { font-family: sans-serif; margin: 0; display: grid; grid-template-columns: 2fr 1fr; gap: 8px; padding: 8px; }
  #video { width: 100%; background: #333; }
  #map { width: 100%; image-rendering: pixelated; transform: scaleY(-1); }
  textarea, input, select { width: 100%; box-sizing: border-box; margin: 2px 0; }
  button { margin: 2px; }
  .off { opacity: .4; pointer-events: none; }
  #log { height: 140px; overflow: auto; font-size: 12px; background: #f4f4f4; }
</style>
</head>
<body>
<div>
  <img id="video" src="/video" alt="camera">
  <label>Prompt</label>
  <textarea id="prompt" rows="3"></textarea>
  <label>Model</label><select id="model"></select>
  <label>Role</label><input id="role">
  <label>Notes</label><input id="notes">
  <button id="send">Send to model</button>
  <button id="say">Speak</button>
  <button id="snap">Take picture</button>
  <label><input type="checkbox" id="drive" style="width:auto"> drive mode (~)</label>
  <div id="phrases"></div>
  <div id="log"></div>
</div>
<div>
  <img id="map" src="/map.png" alt="map">
  <div id="pose"></div>
  <div id="people"></div>
</div>
<script>
const $ = (id) => document.getElementById(id);
const log = (t) => { $('log').textContent = t + '\n' + $('log').textContent; };
const note = () => $('notes').value || undefined;
async function call(method, path, body) {
  const r = await fetch(path, {method, headers: {'Content-Type': 'application/json'},
                               body: body === undefined ? undefined : JSON.stringify(body)});
  const j = await r.json().catch(() => ({}));
  if (!r.ok) log(path + ': ' + (j.error || r.status));
  return j;
}
const keys = {ArrowUp: 'forward', w: 'forward', ArrowDown: 'backward', s: 'backward',
              ArrowLeft: 'rotate_left', a: 'rotate_left', ArrowRight: 'rotate_right', d: 'rotate_right', ' ': 'stop'};
const typing = () => ['INPUT', 'TEXTAREA', 'SELECT'].includes(document.activeElement.tagName);
let held = null;
document.addEventListener('keydown', (e) => {
  if (e.key === '~') { $('drive').checked = !$('drive').checked; e.preventDefault(); return; }
  const cmd = keys[e.key];
  if (!cmd || (typing() && !$('drive').checked)) return;
  e.preventDefault();
  held = cmd;
  call('POST', '/teleop', {command: cmd, scale: 1.0, note: note()});
});
document.addEventListener('keyup', (e) => {
  if (keys[e.key] && held) { held = null; call('POST', '/teleop', {command: 'stop'}); }
});
setInterval(() => { if (held && held !== 'stop') call('POST', '/teleop', {command: held, scale: 1.0}); }, 200);
$('send').onclick = async () => {
  const j = await call('POST', '/llm/complete', {prompt: $('prompt').value, provider: $('model').value, note: note()});
  if (j.response) log('model: ' + j.response);
};
$('say').onclick = () => call('POST', '/speak', {text: $('prompt').value, note: note()});
$('snap').onclick = () => call('POST', '/snapshot', {note: note()});
$('role').onchange = () => call('POST', '/llm/role', {role: $('role').value});
async function loadScenario() {
  const s = await call('GET', '/scenario');
  $('snap').classList.toggle('off', !s.enabled_features.photo_capture);
  $('role').value = (await call('GET', '/llm/role')).role;
  const p = await call('GET', '/llm/providers');
  $('model').innerHTML = p.providers.map((x) => `<option ${x.name === p.default ? 'selected' : ''}>${x.name}</option>`).join('');
}
async function loadPhrases() {
  const s = await call('GET', '/scenario/suggestions');
  $('phrases').innerHTML = '';
  for (const text of s.suggestions) {
    const b = document.createElement('button');
    b.textContent = text;
    b.onclick = () => call('POST', '/speak', {text, note: note()});
    $('phrases').appendChild(b);
  }
}
const ws = new WebSocket(`ws://${location.host}/state`);
ws.onmessage = (m) => {
  const f = JSON.parse(m.data);
  $('pose').textContent = `pose ${f.pose.x.toFixed(2)}, ${f.pose.y.toFixed(2)}, ${f.pose.theta.toFixed(2)}` +
                          (f.robot_connected ? '' : ' (robot offline)');
  $('people').innerHTML = f.tracks.map((t) => `<div>${t.label || 'person ' + t.person_id}</div>`).join('');
};
setInterval(() => { $('map').src = '/map.png?t=' + Date.now(); }, 1000);
setInterval(loadPhrases, 3000);
loadScenario();
loadPhrases();
</script>
</body>
</html>
)HTML";

}  // namespace

const std::string& console_html() {
  static const std::string page(kPage);
  return page;
}

}  // namespace caris::gateway
