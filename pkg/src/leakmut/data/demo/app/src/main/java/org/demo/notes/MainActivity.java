package org.demo.notes;

import android.app.Activity;
import android.content.BroadcastReceiver;
import android.content.Context;
import android.content.Intent;
import android.content.IntentFilter;
import android.os.Bundle;
import android.telephony.PhoneStateListener;
import android.telephony.TelephonyManager;
import android.util.Log;
import android.view.View;
import android.widget.Button;

import java.util.concurrent.ExecutorService;
import java.util.concurrent.Executors;

public class MainActivity extends Activity {

    private static final String TAG = "Notes";

    private int saved;

    @Override
    protected void onCreate(Bundle savedInstanceState) {
        super.onCreate(savedInstanceState);
        setContentView(R.layout.activity_main);

        Button button = (Button) findViewById(R.id.button_id);
        button.setOnClickListener(new View.OnClickListener() {
            public void onClick(View v) {
                saveNote();
            }
        });

        BroadcastReceiver syncReceiver = new BroadcastReceiver() {
            @Override
            public void onReceive(Context context, Intent intent) {
                Log.i(TAG, "sync requested");
            }
        };
        IntentFilter filter = new IntentFilter();
        filter.addAction("org.demo.notes.SYNC");
        registerReceiver(syncReceiver, filter);

        ExecutorService executor = Executors.newSingleThreadExecutor();
        executor.submit(new Runnable() {
            public void run() {
                Log.i(TAG, "warming cache");
            }
        });

        getFragmentManager().beginTransaction().add(new NotesFragment(), "notes").commit();

        TelephonyManager telephony = (TelephonyManager) getSystemService(Context.TELEPHONY_SERVICE);
        telephony.listen(new SignalListener(), PhoneStateListener.LISTEN_DATA_CONNECTION_STATE);
    }

    @Override
    protected void onStart() {
        super.onStart();
        Log.i(TAG, "start");
    }

    @Override
    protected void onResume() {
        super.onResume();
    }

    public void onShareClicked(View view) {
        Log.i(TAG, "share " + saved);
    }

    private void saveNote() {
        saved++;
    }

    private void legacyExport() {
        Log.w(TAG, "export is no longer supported");
    }
}
