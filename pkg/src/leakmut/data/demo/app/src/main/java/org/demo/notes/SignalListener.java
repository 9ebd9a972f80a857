package org.demo.notes;

import android.telephony.PhoneStateListener;
import android.util.Log;

public class SignalListener extends PhoneStateListener {

    @Override
    public void onDataConnectionStateChanged(int state) {
        Log.i("Notes", "data state " + state);
    }
}
