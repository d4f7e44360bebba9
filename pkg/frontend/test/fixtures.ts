export const TIMESERIES_CSV = `t,max_chi2t_grad_u2,bound_u,margin_u,max_chi2t_grad_v2,bound_v,margin_v,min_u,min_v,metric_min_eig
0.0,0.0,2.125,-1.0,0.0,2.375,-1.0,0.5,1.0,1.0
0.25,0.0612,2.125,-0.9712,0.011,2.375,-0.99537,0.41,0.82,1.0
0.5,0.0779,2.125,-0.96334,0.019,2.375,-0.992,0.33,0.67,1.0
1.0,0.0806,2.125,-0.96207,0.024,2.375,-0.98989,0.21,0.44,1.0
`;

export const CONVERGENCE_CSV = `level,h,square_residual,bochner_residual,evolution_residual
32,0.03125,0.0214,0.0861,0.0512
64,0.015625,0.00551,0.0232,0.0147
128,0.0078125,0.00142,0.00633,0.00412
`;

// a signed metric (worst margins from a theorem study) that cannot go on a log axis
export const SIGNED_CONVERGENCE_CSV = `level,h,worst_margin
32,0.03125,-0.962332
64,0.015625,-0.96215
128,0.0078125,-0.962104
`;
