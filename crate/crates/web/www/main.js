import init, { audit_witness, synthesize_reference, simulate_reference } from "./pkg/lure_contract_web.js";

const num = (id) => parseFloat(document.getElementById(id).value);
const show = (id, v) => { document.getElementById(id).textContent = JSON.stringify(v, null, 2); };

await init();

document.getElementById("audit").onclick = () => {
  show("audit-out", JSON.parse(audit_witness(
    num("w1"), num("w2"), num("w3"), num("z1"), num("z2"), num("z3"), num("kp"), num("eta-a"))));
};

document.getElementById("synth").onclick = () => {
  const r = JSON.parse(synthesize_reference(num("eta-s"), num("rho")));
  show("synth-out", r);
  if (r.K) {
    ["k1", "k2", "k3"].forEach((id, i) => { document.getElementById(id).value = r.K[i].toPrecision(6); });
    document.getElementById("kp-sim").value = r.K_psi[0].toPrecision(6);
  }
};

document.getElementById("sim").onclick = () => {
  const r = JSON.parse(simulate_reference(num("k1"), num("k2"), num("k3"), num("kp-sim"), Math.max(1, num("steps") | 0)));
  if (r.error) { show("sim-out", r); return; }
  show("sim-out", r.rates);
  document.getElementById("plot").innerHTML = r.svg;
};
